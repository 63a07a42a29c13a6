"""Deterministic SVG rendering of a scenario and a planned path."""

from __future__ import annotations

import math

from .geometry import Kind, _propagate_raw
from .path import PathSolution

KIND_COLORS = {Kind.CPLUS: "#c0392b", Kind.CMINUS: "#2471a3", Kind.LINE: "#1c1c1c"}
WIDTH = 640


def _f(v: float) -> str:
    return f"{v:.4f}"


def _speed_fill(v: float, vmin: float, vmax: float) -> str:
    """Light gray for the slowest region, darker green for faster ones."""
    t = 0.0 if vmax <= vmin else (v - vmin) / (vmax - vmin)
    r = round(235 - 120 * t)
    g = round(240 - 60 * t)
    b = round(235 - 120 * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(scenario, path: PathSolution, per_segment: int = 40) -> str:
    regs = scenario.map.regions
    xs = [x for r in regs for x, _ in r.vertices]
    ys = [y for r in regs for _, y in r.vertices]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    scale = WIDTH / max(x1 - x0, y1 - y0)
    height = round((y1 - y0) * scale)
    width = round((x1 - x0) * scale)

    def pt(x, y):
        return f"{_f((x - x0) * scale)},{_f((y1 - y) * scale)}"

    vmin, vmax = min(r.v for r in regs), max(r.v for r in regs)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    out.append("<title>time " + _f(path.total_time) + ", route " + path.route + "</title>")
    out.append('<g id="regions" stroke="#7f7f7f" stroke-width="1">')
    for r in regs:
        pts = " ".join(pt(x, y) for x, y in r.vertices)
        out.append(f'<polygon points="{pts}" fill="{_speed_fill(r.v, vmin, vmax)}">'
                   f"<title>region {r.id}: v={r.v:g}, r={r.r:g}</title></polygon>")
    out.append("</g>")
    out.append('<g id="path" fill="none" stroke-width="2">')
    junctions = []
    prev_kind = None
    for j, ph, seg, c, _ in path.iter_segments():
        if seg.duration <= 0:
            continue
        n = per_segment if seg.kind is not Kind.LINE else 1
        pts = []
        for i in range(n + 1):
            x, y, _ = _propagate_raw(c.x, c.y, c.theta, seg.kind.sign, seg.duration * i / n,
                                     ph.v, ph.u_max)
            pts.append(pt(x, y))
        out.append(f'<polyline points="{" ".join(pts)}" stroke="{KIND_COLORS[seg.kind]}"/>')
        if prev_kind is not None and seg.kind is not prev_kind:
            junctions.append((c.x, c.y))
        prev_kind = seg.kind
    out.append("</g>")
    out.append('<g id="junctions" fill="#f39c12" stroke="#000000" stroke-width="0.5">')
    size = 6.0
    for x, y in junctions:
        cx, cy = (x - x0) * scale, (y1 - y) * scale
        tri = [(cx, cy - size), (cx - size * math.sqrt(3) / 2, cy + size / 2),
               (cx + size * math.sqrt(3) / 2, cy + size / 2)]
        out.append('<polygon points="' + " ".join(f"{_f(a)},{_f(b)}" for a, b in tri) + '"/>')
    out.append("</g>")
    out.append('<g id="crossings" fill="none" stroke="#000000" stroke-width="1">')
    for rec in path.crossings:
        cx, cy = rec.frame.anchor
        out.append(f'<circle cx="{_f((cx - x0) * scale)}" cy="{_f((y1 - cy) * scale)}" r="4"/>')
    out.append("</g>")
    for c, color in ((path.start, "#27ae60"), (path.end, "#8e44ad")):
        out.append(f'<circle cx="{_f((c.x - x0) * scale)}" cy="{_f((y1 - c.y) * scale)}" r="4" '
                   f'fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
