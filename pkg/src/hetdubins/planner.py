"""Multi-region minimum-time planning.

Every phase between two crossings is the shortest Dubins word that stays in
the closed phase region.  A crossing is parametrized by its arclength along
the shared edge and its heading relative to the edge normal, so planning a
fixed region sequence is a continuous search over ``2 J`` numbers for ``J``
crossings.  The search is a deterministic multi-start coordinate descent,
followed by a Nelder-Mead pass and a Newton polish on the fixed word
structure (whose stationary point is where the refraction laws hold).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import dubins
from .geometry import (
    TWO_PI, BoundaryFrame, Configuration, Kind, Region, RegionMap, _propagate_raw,
    heading_of, heading_vector, locate, to_boundary_frame, wrap_angle,
)
from .path import PathSolution, Phase, Segment
from .refraction import (
    CrossingKind, CrossingRecord, DegenerateCrossing, Inadmissible, classify_crossing,
    refraction_residuals,
)

log = logging.getLogger(__name__)

#: Allowed excursion outside a closed region polygon (length units).
CONTAIN_TOL = 1e-9
#: Crossings closer than this fraction of the edge length to a vertex are rejected.
VERTEX_MARGIN = 1e-6
#: Pieces shorter than this (time units) count as absent when classifying crossings.
ZERO_PIECE = 1e-7
DEFAULT_SEQUENCE_CAP = 1000


class NoFeasiblePath(RuntimeError):
    """No candidate path satisfies the region constraints."""


class SequenceBudgetExceeded(RuntimeError):
    """More region sequences than the configured cap."""


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    map: RegionMap
    start: Configuration
    goal: Configuration
    start_region: int
    goal_region: int

    def __post_init__(self):
        for name, c, q in (("start", self.start, self.start_region),
                           ("goal", self.goal, self.goal_region)):
            reg = self.map.region(q)
            if not reg.contains_interior(c.x, c.y):
                raise ScenarioError(f"{name} ({c.x}, {c.y}) is not in the interior of region {q}")

    @classmethod
    def auto(cls, region_map: RegionMap, start: Configuration, goal: Configuration) -> "Scenario":
        """Build a scenario, locating the start and goal regions."""
        qs = locate(start.point, region_map)
        qg = locate(goal.point, region_map)
        if not isinstance(qs, int) or not isinstance(qg, int):
            raise ScenarioError("start and goal must each lie inside exactly one region")
        return cls(region_map, start, goal, qs, qg)

    def mirrored(self) -> "Scenario":
        return Scenario(self.map.mirrored(), self.start.mirrored(), self.goal.mirrored(),
                        self.start_region, self.goal_region)

    def scaled(self, k: float) -> "Scenario":
        """Positions and turning radii multiplied by ``k``; speeds unchanged."""
        regs = tuple(Region(r.id, tuple((k * x, k * y) for x, y in r.vertices), r.v, k * r.r)
                     for r in self.map.regions)
        s, g = self.start, self.goal
        return Scenario(RegionMap(regs), Configuration(k * s.x, k * s.y, s.theta),
                        Configuration(k * g.x, k * g.y, g.theta), self.start_region,
                        self.goal_region)

    def with_speeds_scaled(self, k: float) -> "Scenario":
        regs = tuple(Region(r.id, r.vertices, k * r.v, r.r) for r in self.map.regions)
        return Scenario(RegionMap(regs), self.start, self.goal, self.start_region,
                        self.goal_region)


# --------------------------------------------------------------------------- containment


def arc_excursion(halfplanes, x, y, th, sign, sweep, radius) -> float:
    """Largest ``n.p - b`` over a circular arc (positive means it leaves the polygon)."""
    cx = x + sign * radius * math.cos(th)
    cy = y - sign * radius * math.sin(th)
    worst = -math.inf
    th1 = th + sign * sweep
    for nx, ny, b in halfplanes:
        base = nx * cx + ny * cy - b
        gam = math.atan2(ny, -nx)  # heading at which the arc point is furthest along n
        if sign > 0:
            reached = (gam - th) % TWO_PI <= sweep
        else:
            reached = (th - gam - math.pi) % TWO_PI <= sweep
        if reached:
            m = base + radius
        elif sign > 0:
            m = base + radius * max(math.cos(th - gam), math.cos(th1 - gam))
        else:
            m = base - radius * min(math.cos(th - gam), math.cos(th1 - gam))
        if m > worst:
            worst = m
    return worst


def _word_inside(region: Region, x, y, th, kinds, lengths, tol=CONTAIN_TOL) -> bool:
    hp = region.halfplanes
    r = region.r
    for k, ln in zip(kinds, lengths):
        if ln <= 0.0:
            continue
        sg = k.sign
        if sg == 0:
            x, y, th = _propagate_raw(x, y, th, 0, ln, 1.0, 1.0)
            if region.signed_distance(x, y) > tol:
                return False
        else:
            if arc_excursion(hp, x, y, th, sg, ln / r, r) > tol:
                return False
            x, y, th = _propagate_raw(x, y, th, sg, ln, 1.0, 1.0 / r)
    return True


def _ranked(raw, r):
    out = []
    for idx, t, p, q in raw:
        kinds = dubins.WORDS[idx]
        lengths = (t * r, p * r, q * r)
        word = tuple(k.rank for k, ln in zip(kinds, lengths) if ln > 0.0)
        out.append((lengths[0] + lengths[1] + lengths[2], word, idx, lengths))
    out.sort(key=lambda e: (e[0], e[1]))
    return out


def phase_cost(region: Region, a: Configuration, b: Configuration):
    """Shortest contained Dubins word from ``a`` to ``b``: ``(time, word index, lengths)``.

    Returns ``(inf, None, None)`` when every word leaves the region.
    """
    raw = dubins._raw_candidates(a.x, a.y, a.theta, b.x, b.y, b.theta, region.r)
    for length, _, idx, lengths in _ranked(raw, region.r):
        if _word_inside(region, a.x, a.y, a.theta, dubins.WORDS[idx], lengths):
            return length / region.v, idx, lengths
    return math.inf, None, None


def _phase_fixed(region: Region, a: Configuration, b: Configuration, idx: int) -> float:
    for i, t, p, q in dubins._raw_candidates(a.x, a.y, a.theta, b.x, b.y, b.theta, region.r):
        if i == idx:
            lengths = (t * region.r, p * region.r, q * region.r)
            if not _word_inside(region, a.x, a.y, a.theta, dubins.WORDS[idx], lengths):
                return math.inf
            return sum(lengths) / region.v
    return math.inf


# --------------------------------------------------------------------------- one region sequence


class _Walk:
    """Continuous subproblem for a fixed region sequence."""

    def __init__(self, scenario: Scenario, regions: Sequence[int]):
        self.s = scenario
        self.regions = tuple(regions)
        self.regs = [scenario.map.region(q) for q in regions]
        self.edges = []
        self.normal_heading = []
        for a, b in zip(regions, regions[1:]):
            e = scenario.map.shared_edge(a, b)
            nx, ny = scenario.map.edge_normal(a, b)
            self.edges.append(e)
            self.normal_heading.append(heading_of(nx, ny))
        self.J = len(self.edges)

    def lower(self):
        return np.array([v for e in self.edges for v in (VERTEX_MARGIN * e.length, -0.5 * math.pi)])

    def upper(self):
        return np.array([v for e in self.edges
                         for v in ((1 - VERTEX_MARGIN) * e.length, 0.5 * math.pi)])

    def poses(self, x) -> Optional[list[Configuration]]:
        out = [self.s.start]
        for j, e in enumerate(self.edges):
            sj, tj = x[2 * j], x[2 * j + 1]
            if not (VERTEX_MARGIN * e.length <= sj <= (1 - VERTEX_MARGIN) * e.length):
                return None
            if not -0.5 * math.pi < tj < 0.5 * math.pi:
                return None
            px, py = e.point_at(sj)
            out.append(Configuration(px, py, self.normal_heading[j] + tj))
        out.append(self.s.goal)
        return out

    def cost(self, x) -> float:
        poses = self.poses(x)
        if poses is None:
            return math.inf
        total = 0.0
        for reg, a, b in zip(self.regs, poses, poses[1:]):
            t, _, _ = phase_cost(reg, a, b)
            total += t
            if total == math.inf:
                break
        return total

    def words(self, x):
        poses = self.poses(x)
        return tuple(phase_cost(reg, a, b)[1] for reg, a, b in zip(self.regs, poses, poses[1:]))

    def fixed_cost(self, x, words) -> float:
        poses = self.poses(x)
        if poses is None:
            return math.inf
        total = 0.0
        for reg, a, b, w in zip(self.regs, poses, poses[1:], words):
            total += _phase_fixed(reg, a, b, w)
        return total

    def starts(self, dense: bool = False) -> np.ndarray:
        lo, hi = self.lower(), self.upper()
        if self.J == 1:
            n = 64 if dense else 16
            g = (np.arange(n) + 0.5) / n
            pts = np.array([[a, b] for a in g for b in g])
        else:
            pts = qmc.Halton(d=2 * self.J, scramble=False).random((4096 if dense else 512) * self.J)[1:]
        # theta samples span (-pi/2, pi/2); s samples span the edge
        span = np.array([v for e in self.edges for v in (e.length, math.pi)])
        base = np.array([v for _ in self.edges for v in (0.0, -0.5 * math.pi)])
        return np.clip(base + pts * span, lo, hi)

    def ray_seeds(self) -> list[np.ndarray]:
        """Crossings reached by holding the start heading (or the goal heading backwards).

        When the start or goal sits close to a boundary these are often the only
        feasible crossings, and they are too narrow for the regular grid to hit.
        """
        out = []
        mid = np.array([v for e in self.edges for v in (0.5 * e.length, 0.0)])
        for j, c, back in ((0, self.s.start, False), (self.J - 1, self.s.goal, True)):
            e = self.edges[j]
            hx, hy = heading_vector(c.theta)
            if back:
                hx, hy = -hx, -hy
            ex, ey = e.b[0] - e.a[0], e.b[1] - e.a[1]
            den = hx * ey - hy * ex
            if abs(den) < 1e-12:
                continue
            wx, wy = e.a[0] - c.x, e.a[1] - c.y
            t = (wx * ey - wy * ex) / den
            u = (wx * hy - wy * hx) / den
            if t <= 0 or not 0.0 < u < 1.0:
                continue
            th = wrap_angle(c.theta - self.normal_heading[j])
            if abs(th) >= 0.5 * math.pi:
                continue
            x = mid.copy()
            x[2 * j], x[2 * j + 1] = u * e.length, th
            out.append(np.clip(x, self.lower(), self.upper()))
        return out

    def steps(self) -> np.ndarray:
        n = 16 if self.J == 1 else 8
        return np.array([v for e in self.edges for v in (e.length / n, math.pi / n)])


def coordinate_descent(f, x0, step0, min_step=1e-11, tol=1e-9, max_evals=20000):
    """Compass search with per-coordinate shrinking steps."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    step = np.array(step0, dtype=float)
    evals = 1
    while evals < max_evals and np.any(step > min_step):
        improved = False
        for i in range(len(x)):
            if step[i] <= min_step:
                continue
            for d in (1.0, -1.0):
                y = x.copy()
                y[i] += d * step[i]
                fy = f(y)
                evals += 1
                if fy < fx - tol * 1e-3:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
    return x, fx


def _fd_grad_hess(f, x, h):
    n = len(x)
    f0 = f(x)
    g = np.zeros(n)
    H = np.zeros((n, n))
    fp = np.zeros(n)
    fm = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        fp[i], fm[i] = f(x + e), f(x - e)
        g[i] = (fp[i] - fm[i]) / (2 * h[i])
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej))
            H[i, j] = H[j, i] = v / (4 * h[i] * h[j])
    return f0, g, H


def newton_polish(walk: _Walk, x, iters=25):
    """Newton iterations on the fixed-word time; returns the improved point."""
    words = walk.words(x)
    if any(w is None for w in words):
        return x
    f = lambda y: walk.fixed_cost(y, words)  # noqa: E731
    scale = max(1.0, min(r.r for r in walk.regs))
    h = np.array([v for _ in walk.edges for v in (1e-5 * scale, 1e-5)])
    best = np.array(x, dtype=float)
    fbest = f(best)
    for _ in range(iters):
        with np.errstate(invalid="ignore"):
            f0, g, H = _fd_grad_hess(f, best, h)
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(H)):
            break
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        accepted = False
        t = 1.0
        for _ in range(8):
            y = best + t * step
            fy = f(y)
            if fy <= fbest + 1e-13 * max(1.0, abs(fbest)) and walk.cost(y) <= fy * (1 + 1e-12):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        done = np.max(np.abs(t * step) / h) < 1e-7
        best, fbest = y, fy
        if done:
            break
    return best


def _word_lengths(region: Region, a: Configuration, b: Configuration, idx: int):
    for i, t, p, q in dubins._raw_candidates(a.x, a.y, a.theta, b.x, b.y, b.theta, region.r):
        if i == idx:
            return (t * region.r, p * region.r, q * region.r)
    return None


def snap_degenerate(walk: _Walk, x, rel=(1e-2, 1e-4, 1e-6)):
    """Drive nearly vanished pieces to exactly zero length.

    Optima often sit where a piece next to a crossing disappears (e.g. a pure
    arc reaching the boundary), where the time has a kink that compass and
    Newton searches only approach.  For decreasing thresholds, pieces shorter
    than ``rel * r`` are constrained to zero and the remaining time is
    minimized on that manifold; the first result that does not increase the
    true time is returned.
    """
    poses = walk.poses(x)
    if poses is None or walk.J == 0:
        return x
    info = [phase_cost(reg, a, b) for reg, a, b in zip(walk.regs, poses, poses[1:])]
    if any(idx is None for _, idx, _ in info):
        return x
    words = [idx for _, idx, _ in info]
    f0 = walk.cost(x)
    lo, hi = walk.lower(), walk.upper()
    for thr in rel:
        tiny = [(j, k) for j, (_, _, lengths) in enumerate(info)
                for k in range(3) if lengths[k] <= thr * walk.regs[j].r]
        if not tiny:
            continue

        def cons(y, tiny=tiny):
            ps = walk.poses(y)
            if ps is None:
                return np.full(len(tiny), 1e3)
            out = []
            for j, k in tiny:
                a, b = ps[j], ps[j + 1]
                out.append(dubins.signed_pieces(words[j], a.x, a.y, a.theta,
                                                b.x, b.y, b.theta, walk.regs[j].r)[k])
            return np.array(out)

        def obj(y, tiny=tiny):
            ps = walk.poses(y)
            if ps is None:
                return 1e6
            total = 0.0
            for j, (reg, a, b) in enumerate(zip(walk.regs, ps, ps[1:])):
                lengths = _word_lengths(reg, a, b, words[j])
                if lengths is None:
                    return 1e6
                total += sum(ln for k, ln in enumerate(lengths) if (j, k) not in tiny) / reg.v
            return total

        try:
            with warnings.catch_warnings():
                # SLSQP may step outside the bounds and clip; the projection below copes
                warnings.simplefilter("ignore", RuntimeWarning)
                res = minimize(obj, x, method="SLSQP", bounds=list(zip(lo, hi)),
                               constraints=[{"type": "eq", "fun": cons}],
                               options=dict(ftol=1e-15, maxiter=200))
        except (ValueError, FloatingPointError):
            continue
        y = _project(cons, np.clip(res.x, lo, hi), lo, hi)
        if y is None:
            continue
        fy = walk.cost(y)
        if fy <= f0 + 1e-9 * max(1.0, f0):
            return y
    return x


def _project(cons, y, lo, hi, iters=8):
    """Gauss-Newton steps onto ``cons(y) = 0``; ``None`` if it does not converge."""
    h = 1e-7
    for _ in range(iters):
        c = cons(y)
        if np.max(np.abs(c)) <= 1e-15:
            break
        J = np.empty((len(c), len(y)))
        for i in range(len(y)):
            e = np.zeros(len(y))
            e[i] = h
            J[:, i] = (cons(y + e) - cons(y - e)) / (2 * h)
        step = np.linalg.lstsq(J, -c, rcond=None)[0]
        y = np.clip(y + step, lo, hi)
    c = cons(y)
    if np.max(np.abs(c)) > 1e-12:
        return None
    return y


def optimize_walk(walk: _Walk, n_refine: int = 6):
    """Best crossing parameters for one region sequence: ``(time, x)``."""
    if walk.J == 0:
        return walk.cost(np.zeros(0)), np.zeros(0)
    pts = np.vstack([walk.starts()] + walk.ray_seeds())
    vals = np.array([walk.cost(p) for p in pts])
    if not np.any(np.isfinite(vals)):
        pts = walk.starts(dense=True)
        vals = np.array([walk.cost(p) for p in pts])
    order = [i for i in np.argsort(vals, kind="stable") if np.isfinite(vals[i])]
    if not order:
        return math.inf, None
    best_f, best_x = math.inf, None
    steps = walk.steps()
    for i in order[:n_refine]:
        x, fx = coordinate_descent(walk.cost, pts[i], steps)
        res = minimize(walk.cost, x, method="Nelder-Mead",
                       options=dict(xatol=1e-11, fatol=1e-13, maxiter=400 * len(x)))
        if res.fun < fx:
            x, fx = res.x, res.fun
        x = newton_polish(walk, x)
        x = snap_degenerate(walk, x)
        fx = walk.cost(x)
        if fx < best_f:
            best_f, best_x = fx, x
    best_x = refraction_polish(walk, best_x)
    return walk.cost(best_x), best_x


def refraction_polish(walk: _Walk, x, iters: int = 10):
    """Newton iterations on the refraction residuals of every L C L crossing.

    At a converged optimum these residuals vanish, but minimizing the time only
    locates the crossing to about the square root of machine precision, which
    is too coarse when the spanning arc is short.  The residuals are first-order
    conditions, so solving them directly restores full precision.  The result
    is kept only if the path structure is unchanged and the time does not grow
    beyond rounding.
    """
    x = np.array(x, dtype=float)
    try:
        path, _ = build_path(walk, x)
    except NoFeasiblePath:
        return x
    lcl = [r.junction for r in path.crossings if r.is_lcl]
    if not lcl:
        return x
    idx = [i for j in lcl for i in (2 * j, 2 * j + 1)]
    family = path.family

    def residuals(z):
        y = x.copy()
        y[idx] = z
        if not math.isfinite(walk.cost(y)):
            return None
        p, _ = build_path(walk, y)
        recs = [r for r in p.crossings if r.is_lcl]
        if p.family != family or [r.junction for r in recs] != lcl:
            return None
        try:
            return np.array([v for r in recs for v in refraction_residuals(
                r, walk.s.map.region(r.p), walk.s.map.region(r.pp))])
        except DegenerateCrossing:
            return None

    z = x[idx].copy()
    F = residuals(z)
    if F is None:
        return x
    scale = np.array([v for j in lcl for v in (walk.edges[j].length, 1.0)])
    h = 1e-7 * np.minimum(scale, 1.0)
    for _ in range(iters):
        if np.max(np.abs(F)) < 1e-13:
            break
        Jm = np.empty((len(F), len(z)))
        for i in range(len(z)):
            zp, zm = z.copy(), z.copy()
            zp[i] += h[i]
            zm[i] -= h[i]
            Fp, Fm = residuals(zp), residuals(zm)
            if Fp is None or Fm is None:
                return _accept(walk, x, idx, z)
            Jm[:, i] = (Fp - Fm) / (2 * h[i])
        try:
            step = -np.linalg.solve(Jm, F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        for _ in range(10):
            Fn = residuals(z + t * step)
            if Fn is not None and np.max(np.abs(Fn)) < np.max(np.abs(F)):
                break
            t *= 0.5
        else:
            break
        z, F = z + t * step, Fn
    return _accept(walk, x, idx, z)


def _accept(walk: _Walk, x, idx, z):
    y = x.copy()
    y[idx] = z
    f0, f1 = walk.cost(x), walk.cost(y)
    return y if f1 <= f0 * (1 + 1e-9) else x


# --------------------------------------------------------------------------- path assembly


def _piece_headings(phase: Phase):
    """``(kind, duration, start heading)`` of each nonzero piece, consecutive equals merged."""
    out = []
    for s, c in zip(phase.segments, phase.segment_starts()):
        if s.duration <= 0:
            continue
        if out and out[-1][0] is s.kind:
            k, d, th = out[-1]
            out[-1] = (k, d + s.duration, th)
        else:
            out.append((s.kind, s.duration, c.theta))
    return out


def crossing_record(region_map: RegionMap, before: Phase, after: Phase, junction: int,
                    zero_tol: float = ZERO_PIECE):
    """Classify the junction between two phases and build its :class:`CrossingRecord`.

    Returns ``(record, kind_or_inadmissible)``; the record carries the
    admissible kind or, for an inadmissible crossing, the nearest geometric kind.
    """
    p, pp = before.region, after.region
    nx, ny = region_map.edge_normal(p, pp)
    c = after.start
    frame = BoundaryFrame.from_normal(c.point, nx, ny)
    th_star = to_boundary_frame(c, frame).theta
    bp = [(k, d, th) for k, d, th in _piece_headings(before) if d > zero_tol]
    ap = [(k, d, th) for k, d, th in _piece_headings(after) if d > zero_tol]
    kind = classify_crossing([(k, d) for k, d, _ in bp], [(k, d) for k, d, _ in ap],
                             th_star, before.v, after.v, zero_tol=zero_tol)
    theta_p = theta_pp = None
    if bp:
        if bp[-1][0] is Kind.LINE:
            theta_p = th_star
        elif len(bp) > 1 and bp[-2][0] is Kind.LINE:
            theta_p = wrap_angle(bp[-2][2] - frame.phi)
    if ap:
        if ap[0][0] is Kind.LINE:
            theta_pp = th_star
        elif len(ap) > 1 and ap[1][0] is Kind.LINE:
            theta_pp = wrap_angle(ap[1][2] - frame.phi)
    geo = kind if isinstance(kind, CrossingKind) else _geometric_kind(bp, ap)
    rec = CrossingRecord(frame, th_star, theta_p, theta_pp, p, pp, geo, junction)
    return rec, kind


def _geometric_kind(bp, ap) -> CrossingKind:
    last = bp[-1][0] if bp else Kind.LINE
    first = ap[0][0] if ap else Kind.LINE
    table = {
        (Kind.LINE, Kind.LINE): CrossingKind.L_OBLIQUE,
        (Kind.CPLUS, Kind.CPLUS): CrossingKind.CPLUS,
        (Kind.CMINUS, Kind.CMINUS): CrossingKind.CMINUS,
        (Kind.CPLUS, Kind.LINE): CrossingKind.CPLUS_L,
        (Kind.CMINUS, Kind.LINE): CrossingKind.CMINUS_L,
        (Kind.LINE, Kind.CPLUS): CrossingKind.L_CPLUS,
        (Kind.LINE, Kind.CMINUS): CrossingKind.L_CMINUS,
        (Kind.CPLUS, Kind.CMINUS): CrossingKind.CPLUS_CMINUS,
        (Kind.CMINUS, Kind.CPLUS): CrossingKind.CMINUS_CPLUS,
    }
    return table[(last, first)]


@dataclass(frozen=True)
class PlanDetails:
    """Per-sequence outcomes kept for diagnostics (sweeps, CLI reports)."""

    route: tuple[int, ...]
    time: float
    admissible: bool


@dataclass
class _Candidate:
    time: float
    key: tuple
    path: PathSolution
    admissible: bool
    issues: list = field(default_factory=list)


def _land(x, y, th, sign, d0, v, w, edge, normal, direction):
    """Duration near ``d0`` after which the piece ends exactly on the edge line.

    ``direction`` is +1 to follow the piece forward from ``(x, y, th)`` and -1
    to trace it backward.  Returns ``None`` if Newton's method does not settle.
    """
    nx, ny = normal
    ax, ay = edge.a
    d = d0
    for _ in range(30):
        px, py, pth = _propagate_raw(x, y, th, sign, direction * d, v, w)
        f = nx * (px - ax) + ny * (py - ay)
        hx, hy = heading_vector(pth)
        df = direction * v * (nx * hx + ny * hy)
        if abs(f) <= 1e-15 * max(1.0, abs(ax), abs(ay)):
            return d
        if abs(df) < 1e-12:
            return None
        d -= f / df
        if d < 0.0:
            return None
    return d if abs(d - d0) <= 1e-6 * max(1.0, d0) else None


def _exact_chain(walk: _Walk, poses, pieces):
    """Segment lists whose chained endpoints meet every edge line and the goal exactly.

    A phase whose Dubins word has a collapsed piece only reaches its target to
    about the square root of machine precision.  Phases before the last
    well-conditioned one are traced forward and those after it backward, each
    ending exactly on its edge line; the well-conditioned phase is then solved
    afresh between the two landed poses.  Returns ``None`` when this fails.
    """
    n = len(pieces)
    ends = []
    for reg, a, b, segs in zip(walk.regs, poses, poses[1:], pieces):
        x, y, th = a.x, a.y, a.theta
        for k, d in segs:
            x, y, th = _propagate_raw(x, y, th, k.sign, d, reg.v, reg.u_max)
        ends.append(max(math.hypot(x - b.x, y - b.y), abs(math.remainder(th - b.theta, TWO_PI))))
    if max(ends) <= 1e-12:
        return pieces
    good = [j for j in range(n) if ends[j] <= 1e-12]
    if not good:
        return None
    m = good[-1]
    out = [list(p) for p in pieces]
    cur = poses[0]
    for j in range(m):
        reg, segs = walk.regs[j], out[j]
        x, y, th = cur.x, cur.y, cur.theta
        for k, d in segs[:-1]:
            x, y, th = _propagate_raw(x, y, th, k.sign, d, reg.v, reg.u_max)
        k, d0 = segs[-1]
        d = _land(x, y, th, k.sign, d0, reg.v, reg.u_max, walk.edges[j],
                  walk.s.map.edge_normal(walk.regions[j], walk.regions[j + 1]), 1)
        if d is None:
            return None
        segs[-1] = (k, d)
        cur = Configuration(*_propagate_raw(x, y, th, k.sign, d, reg.v, reg.u_max))
    nxt = poses[-1]
    for j in range(n - 1, m, -1):
        reg, segs = walk.regs[j], out[j]
        x, y, th = nxt.x, nxt.y, nxt.theta
        for k, d in reversed(segs[1:]):
            x, y, th = _propagate_raw(x, y, th, k.sign, -d, reg.v, reg.u_max)
        k, d0 = segs[0]
        d = _land(x, y, th, k.sign, d0, reg.v, reg.u_max, walk.edges[j - 1],
                  walk.s.map.edge_normal(walk.regions[j - 1], walk.regions[j]), -1)
        if d is None:
            return None
        segs[0] = (k, d)
        nxt = Configuration(*_propagate_raw(x, y, th, k.sign, -d, reg.v, reg.u_max))
    reg = walk.regs[m]
    t, idx, lengths = phase_cost(reg, cur, nxt)
    if idx is None:
        return None
    out[m] = [(k, ln / reg.v) for k, ln in zip(dubins.WORDS[idx], lengths) if ln > 0.0]
    return out


def build_path(walk: _Walk, x) -> tuple[PathSolution, list]:
    poses = walk.poses(x)
    pieces = []
    for reg, a, b in zip(walk.regs, poses, poses[1:]):
        t, idx, lengths = phase_cost(reg, a, b)
        if idx is None:
            raise NoFeasiblePath("phase became infeasible while assembling the path")
        pieces.append([(k, ln / reg.v) for k, ln in zip(dubins.WORDS[idx], lengths) if ln > 0.0])
    exact = _exact_chain(walk, poses, pieces)
    if exact is not None:
        pieces = exact
    phases = []
    start = poses[0]
    for reg, segs in zip(walk.regs, pieces):
        # chain phases through the propagated end so crossings are exactly continuous
        ph = Phase(reg.id, reg.v, reg.u_max, start, tuple(Segment(k, d, reg.id) for k, d in segs))
        phases.append(ph)
        start = ph.end
    return path_from_phases(walk.s.map, phases)


def path_from_phases(region_map: RegionMap, phases: Sequence[Phase]) -> tuple[PathSolution, list]:
    """Attach crossing records and the family spelling to a list of phases.

    Returns ``(path, issues)`` where ``issues`` lists ``(junction, Inadmissible)``.
    """
    records, issues = [], []
    for j in range(len(phases) - 1):
        rec, kind = crossing_record(region_map, phases[j], phases[j + 1], j)
        records.append(rec)
        if isinstance(kind, Inadmissible):
            issues.append((j, kind))
    path = PathSolution(tuple(phases), tuple(records), "")
    return PathSolution(path.phases, path.crossings, path.spelling()), issues


def path_with_crossings(scenario: Scenario, regions: Sequence[int], x) -> PathSolution:
    """Path through ``regions`` whose crossings are pinned to the given parameters.

    ``x`` holds ``(s_j, theta_j)`` per crossing: the arclength along the shared
    edge and the heading relative to the edge normal.  Each phase is the
    shortest Dubins word that stays inside its region.  Useful for building
    deliberately suboptimal paths.
    """
    walk = _Walk(scenario, regions)
    if not math.isfinite(walk.cost(np.asarray(x, dtype=float))):
        raise NoFeasiblePath("no region-confined phase joins the requested crossings")
    return build_path(walk, np.asarray(x, dtype=float))[0]


def crossing_parameters(scenario: Scenario, path: PathSolution) -> np.ndarray:
    """Inverse of :func:`path_with_crossings` for a planned path."""
    walk = _Walk(scenario, path.regions)
    out = []
    for j, e in enumerate(walk.edges):
        c = path.phases[j + 1].start
        ax, ay = e.a
        bx, by = e.b
        s = ((c.x - ax) * (bx - ax) + (c.y - ay) * (by - ay)) / e.length
        out.extend((s, wrap_angle(c.theta - walk.normal_heading[j])))
    return np.array(out)


def _spelling_key(spelling: str) -> tuple:
    rank = {"C-": 0, "C+": 1, "L": 2, "|": 3}
    out = []
    i = 0
    while i < len(spelling):
        tok = spelling[i:i + 2] if spelling[i] == "C" else spelling[i]
        out.append(rank[tok])
        i += len(tok)
    return tuple(out)


def enumerate_walks(region_map: RegionMap, start: int, goal: int, max_crossings: int,
                    cap: int = DEFAULT_SEQUENCE_CAP) -> list[tuple[int, ...]]:
    """Region sequences from ``start`` to ``goal`` with at most ``max_crossings`` crossings.

    Consecutive regions differ; revisiting a region later in the walk is allowed.
    Shorter walks come first.
    """
    if max_crossings < 0:
        raise ValueError("max_crossings must be >= 0")
    out: list[tuple[int, ...]] = []
    frontier = [(start,)]
    for depth in range(max_crossings + 1):
        nxt = []
        for w in frontier:
            if w[-1] == goal:
                out.append(w)
                if len(out) > cap:
                    raise SequenceBudgetExceeded(
                        f"more than {cap} region sequences with <= {max_crossings} crossings")
            if depth < max_crossings:
                nxt.extend(w + (nb,) for nb in region_map.neighbors(w[-1]))
        frontier = nxt
    return out


def _select(cands: list[_Candidate]) -> _Candidate:
    pool = [c for c in cands if c.admissible] or cands
    tmin = min(c.time for c in pool)
    close = [c for c in pool if c.time - tmin <= 1e-9 * max(1.0, tmin)]
    return min(close, key=lambda c: c.key)


def _plan_walks(s: Scenario, walks) -> tuple[PathSolution, list[PlanDetails]]:
    cands, details = [], []
    for w in walks:
        walk = _Walk(s, w)
        t, x = optimize_walk(walk)
        if not math.isfinite(t):
            details.append(PlanDetails(w, math.inf, False))
            continue
        path, issues = build_path(walk, x)
        for j, bad in issues:
            log.debug("route %s crossing %d inadmissible: %s", w, j, bad.pattern)
        details.append(PlanDetails(w, path.total_time, not issues))
        cands.append(_Candidate(path.total_time, _spelling_key(path.family), path,
                                not issues, issues))
    if not cands:
        raise NoFeasiblePath("every region sequence is infeasible for the given turning radii")
    return _select(cands).path, details


def plan_two_region(s: Scenario) -> PathSolution:
    """Minimum-time path with a single crossing between two adjacent regions."""
    if len(s.map.regions) != 2 or len(s.map.shared_edges) != 1:
        raise ScenarioError("plan_two_region needs exactly two regions sharing one edge")
    if s.start_region == s.goal_region:
        raise ScenarioError("start and goal must lie in different regions")
    path, _ = _plan_walks(s, [(s.start_region, s.goal_region)])
    return path


def plan_multi_region(s: Scenario, max_crossings: int, cap: int = DEFAULT_SEQUENCE_CAP,
                      details: Optional[list] = None) -> PathSolution:
    """Best path over every region sequence with at most ``max_crossings`` crossings."""
    walks = enumerate_walks(s.map, s.start_region, s.goal_region, max_crossings, cap)
    if not walks:
        raise NoFeasiblePath(
            f"goal region {s.goal_region} is more than {max_crossings} crossings away")
    path, info = _plan_walks(s, walks)
    if details is not None:
        details.extend(info)
    return path


def plan(s: Scenario, max_crossings: Optional[int] = None) -> PathSolution:
    """Convenience dispatcher used by the CLI."""
    if max_crossings is None:
        max_crossings = max(1, len(s.map.regions) - 1)
    return plan_multi_region(s, max_crossings)


def path_time(p: PathSolution) -> float:
    return p.total_time
