"""Scenario documents (JSON, ``format: 1``) and trajectory tables (CSV).

Angles are stored in degrees in scenario files and in radians in trajectory
tables.  Every parse error names the offending field (or line) so the CLI can
report it precisely.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .geometry import Configuration, GeometryError, Kind, Region, RegionMap
from .path import PathSolution, Phase, Segment
from .planner import Scenario, ScenarioError, path_from_phases

FORMAT_VERSION = 1
CSV_COLUMNS = ("t", "j", "q", "x", "y", "theta_rad", "u", "segment_kind")


class ScenarioFileError(ValueError):
    """A scenario or trajectory document could not be parsed."""


@dataclass
class ScenarioDocument:
    scenario: Scenario
    options: dict = field(default_factory=dict)
    sweep: Optional[dict] = None
    raw: dict = field(default_factory=dict)


def _number(obj: dict, key: str, where: str, positive: bool = False) -> float:
    if key not in obj:
        raise ScenarioFileError(f"{where}.{key}: missing")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ScenarioFileError(f"{where}.{key}: expected a finite number, got {val!r}")
    if positive and val <= 0:
        raise ScenarioFileError(f"{where}.{key}: must be positive, got {val!r}")
    return float(val)


def _pose(obj: Any, where: str) -> tuple[Configuration, Optional[int]]:
    if not isinstance(obj, dict):
        raise ScenarioFileError(f"{where}: expected an object with x, y, theta_deg")
    c = Configuration(_number(obj, "x", where), _number(obj, "y", where),
                      math.radians(_number(obj, "theta_deg", where)))
    q = obj.get("region")
    if q is not None and (isinstance(q, bool) or not isinstance(q, int)):
        raise ScenarioFileError(f"{where}.region: expected an integer region id, got {q!r}")
    return c, q


def scenario_from_dict(doc: Any) -> ScenarioDocument:
    if not isinstance(doc, dict):
        raise ScenarioFileError("document: expected a JSON object")
    if doc.get("format") != FORMAT_VERSION:
        raise ScenarioFileError(f"format: expected {FORMAT_VERSION}, got {doc.get('format')!r}")
    regs_raw = doc.get("regions")
    if not isinstance(regs_raw, list) or not regs_raw:
        raise ScenarioFileError("regions: expected a nonempty list")
    regions = []
    for i, r in enumerate(regs_raw):
        where = f"regions[{i}]"
        if not isinstance(r, dict):
            raise ScenarioFileError(f"{where}: expected an object")
        rid = r.get("id")
        if isinstance(rid, bool) or not isinstance(rid, int):
            raise ScenarioFileError(f"{where}.id: expected an integer, got {rid!r}")
        verts = r.get("vertices")
        if not isinstance(verts, list) or len(verts) < 3:
            raise ScenarioFileError(f"{where}.vertices: expected a list of at least 3 [x, y] pairs")
        pts = []
        for k, p in enumerate(verts):
            if (not isinstance(p, list) or len(p) != 2
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)):
                raise ScenarioFileError(f"{where}.vertices[{k}]: expected [x, y], got {p!r}")
            pts.append((float(p[0]), float(p[1])))
        try:
            regions.append(Region(rid, tuple(pts), _number(r, "v", where, True),
                                  _number(r, "r", where, True)))
        except GeometryError as exc:
            raise ScenarioFileError(f"{where}: {exc}") from None
    try:
        rmap = RegionMap(tuple(regions))
    except GeometryError as exc:
        raise ScenarioFileError(f"regions: {exc}") from None
    start, qs = _pose(doc.get("start"), "start")
    goal, qg = _pose(doc.get("goal"), "goal")
    try:
        if qs is None or qg is None:
            auto = Scenario.auto(rmap, start, goal)
            qs = auto.start_region if qs is None else qs
            qg = auto.goal_region if qg is None else qg
        scenario = Scenario(rmap, start, goal, qs, qg)
    except (ScenarioError, GeometryError, KeyError) as exc:
        raise ScenarioFileError(f"start/goal: {exc}") from None
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise ScenarioFileError("options: expected an object")
    mc = options.get("max_crossings")
    if mc is not None and (isinstance(mc, bool) or not isinstance(mc, int) or mc < 0):
        raise ScenarioFileError(f"options.max_crossings: expected a nonnegative integer, got {mc!r}")
    sweep = doc.get("sweep")
    if sweep is not None and not isinstance(sweep, dict):
        raise ScenarioFileError("sweep: expected an object with parameter and values")
    return ScenarioDocument(scenario, options, sweep, doc)


def load_scenario(path: str | Path) -> ScenarioDocument:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{p}: cannot read scenario file ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scenario_from_dict(doc)
    except ScenarioFileError as exc:
        raise ScenarioFileError(f"{p}: {exc}") from None


def dumps_scenario(doc: dict) -> str:
    """JSON text with each vertex pair kept on one line."""
    text = json.dumps(doc, indent=2)
    text = re.sub(r"\[\s*(-?[\d.eE+-]+),\s*(-?[\d.eE+-]+)\s*\]", r"[\1, \2]", text)
    return text + "\n"


def scenario_to_dict(s: Scenario, options: Optional[dict] = None,
                     sweep: Optional[dict] = None) -> dict:
    def pose(c: Configuration, q: int) -> dict:
        return {"x": c.x, "y": c.y, "theta_deg": round(math.degrees(c.theta), 12), "region": q}

    doc = {
        "format": FORMAT_VERSION,
        "regions": [{"id": r.id, "vertices": [list(v) for v in r.vertices], "v": r.v, "r": r.r}
                    for r in s.map.regions],
        "start": pose(s.start, s.start_region),
        "goal": pose(s.goal, s.goal_region),
        "options": dict(options or {}),
    }
    if sweep is not None:
        doc["sweep"] = sweep
    return doc


_TOKEN = re.compile(r"([A-Za-z_]\w*)|\[(\d+)\]|\.")


def set_parameter(doc: dict, param: str, value: Any) -> dict:
    """Copy of ``doc`` with the field addressed by ``param`` (e.g. ``regions[1].v``) replaced."""
    keys: list = []
    pos = 0
    while pos < len(param):
        m = _TOKEN.match(param, pos)
        if m is None:
            raise ScenarioFileError(f"sweep parameter {param!r}: cannot parse at offset {pos}")
        if m.group(1) is not None:
            keys.append(m.group(1))
        elif m.group(2) is not None:
            keys.append(int(m.group(2)))
        pos = m.end()
    if not keys:
        raise ScenarioFileError("sweep parameter is empty")
    out = copy.deepcopy(doc)
    node: Any = out
    for k in keys[:-1]:
        try:
            node = node[k]
        except (KeyError, IndexError, TypeError):
            raise ScenarioFileError(f"sweep parameter {param!r}: no field {k!r}") from None
    last = keys[-1]
    try:
        node[last]
    except (KeyError, IndexError, TypeError):
        raise ScenarioFileError(f"sweep parameter {param!r}: no field {last!r}") from None
    node[last] = value
    return out


# --------------------------------------------------------------------------- trajectory tables


def _fmt(v: float) -> str:
    return repr(float(v))


def path_to_csv(path: PathSolution, per_segment: int = 20) -> str:
    """Sampled trajectory; both ends of every segment are included."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in path.sample(per_segment):
        w.writerow((_fmt(s.t), s.j, s.q, _fmt(s.x), _fmt(s.y), _fmt(s.theta), _fmt(s.u), s.kind.value))
    return buf.getvalue()


def path_from_csv(text: str, region_map: RegionMap) -> PathSolution:
    """Rebuild a path from a trajectory table written by :func:`path_to_csv`.

    A segment is a run of rows with the same phase and kind; a repeated time
    stamp after a segment of positive duration marks the start of the next one.
    """
    rows = list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_COLUMNS:
        raise ScenarioFileError(f"line 1: expected header {','.join(CSV_COLUMNS)}")
    kinds = {k.value: k for k in Kind}
    parsed = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ScenarioFileError(f"line {n}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        try:
            t, j, q = float(row[0]), int(row[1]), int(row[2])
            x, y, th, u = (float(v) for v in row[3:7])
        except ValueError as exc:
            raise ScenarioFileError(f"line {n}: {exc}") from None
        if row[7] not in kinds:
            raise ScenarioFileError(f"line {n}: unknown segment_kind {row[7]!r}")
        if not all(math.isfinite(v) for v in (t, x, y, th, u)):
            raise ScenarioFileError(f"line {n}: non-finite value")
        parsed.append((n, t, j, q, x, y, th, kinds[row[7]]))
    if not parsed:
        raise ScenarioFileError("trajectory table has no rows")
    # group into segments
    segs: list[list] = []
    for rec in parsed:
        n, t, j, q, x, y, th, k = rec
        if segs:
            prev = segs[-1][-1]
            if t < prev[1] - 1e-12:
                raise ScenarioFileError(f"line {n}: time decreases")
            if j < prev[2]:
                raise ScenarioFileError(f"line {n}: phase index decreases")
        if (not segs or (j, k) != (segs[-1][-1][2], segs[-1][-1][7])
                or (t == segs[-1][-1][1] and t > segs[-1][0][1])):
            segs.append([rec])
        else:
            segs[-1].append(rec)
    phases: list[Phase] = []
    cur: list = []
    for seg in segs:
        if len(seg) < 2:
            raise ScenarioFileError(f"line {seg[0][0]}: segment with a single sample")
        if cur and seg[0][2] != cur[0][0][2]:
            phases.append(_phase(cur, region_map))
            cur = []
        cur.append(seg)
    phases.append(_phase(cur, region_map))
    return path_from_phases(region_map, phases)[0]


def _phase(segs: list, region_map: RegionMap) -> Phase:
    n, _, j, q, x, y, th, _ = segs[0][0]
    try:
        reg = region_map.region(q)
    except KeyError:
        raise ScenarioFileError(f"line {n}: unknown region {q}") from None
    out = tuple(Segment(seg[0][7], seg[-1][1] - seg[0][1], q) for seg in segs)
    return Phase(q, reg.v, reg.u_max, Configuration(x, y, th), out)
