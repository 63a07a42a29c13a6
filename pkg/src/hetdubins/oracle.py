"""Independent brute-force minimum-time solver.

Paths are searched directly as bang-singular control schedules: a sequence of
control signs (``+1``, ``0``, ``-1``) with nonnegative durations, simulated
exactly through the region map with the speed and turning rate switching at
every edge crossing.  Nothing here uses the Dubins word formulas or the
planner, so agreement between the two is meaningful.
"""

from __future__ import annotations

import itertools
import math
import warnings
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .geometry import (
    TWO_PI, Configuration, RegionMap, _propagate_raw, locate,
)
from .path import PathSolution


class LeftDomain(RuntimeError):
    """The simulated trajectory left the union of regions."""


class NoFeasibleFound(RuntimeError):
    """No schedule reached the goal within the search budget."""


@dataclass(frozen=True)
class ControlSchedule:
    """Control sign classes with durations; the magnitude follows the current region."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        ents = tuple((int(s), float(d)) for s, d in self.entries)
        object.__setattr__(self, "entries", ents)
        for i, (s, d) in enumerate(ents):
            if s not in (-1, 0, 1):
                raise ValueError(f"entry {i}: control sign must be -1, 0 or 1, got {s}")
            if d < 0:
                raise ValueError(f"entry {i}: negative duration {d}")
            if i and ents[i - 1][0] == s:
                raise ValueError(f"entries {i - 1} and {i} repeat control sign {s}")

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.entries)

    @property
    def total_time(self) -> float:
        return sum(d for _, d in self.entries)

    def __add__(self, other: "ControlSchedule") -> "ControlSchedule":
        ents = list(self.entries)
        for s, d in other.entries:
            if ents and ents[-1][0] == s:
                ents[-1] = (s, ents[-1][1] + d)
            else:
                ents.append((s, d))
        return ControlSchedule(tuple(ents))

    @classmethod
    def from_path(cls, path: PathSolution) -> "ControlSchedule":
        """Replay a planned path; pieces spanning a crossing merge into one entry."""
        ents: list[tuple[int, float]] = []
        for ph in path.phases:
            for s in ph.segments:
                if s.duration <= 0:
                    continue
                if ents and ents[-1][0] == s.kind.sign:
                    ents[-1] = (s.kind.sign, ents[-1][1] + s.duration)
                else:
                    ents.append((s.kind.sign, s.duration))
        return cls(tuple(ents))


@dataclass(frozen=True)
class CrossingEvent:
    t: float
    p: int
    q: int
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class Trajectory:
    poses: tuple[tuple[float, int, float, float, float], ...]  # (t, region, x, y, theta)
    events: tuple[CrossingEvent, ...]

    @property
    def end(self) -> Configuration:
        _, _, x, y, th = self.poses[-1]
        return Configuration(x, y, th)

    @property
    def end_region(self) -> int:
        return self.poses[-1][1]

    @property
    def duration(self) -> float:
        return self.poses[-1][0]


def _exit_time(reg, x, y, th, sign, v, u_max, horizon):
    """First time in ``(0, horizon]`` at which the piece leaves ``reg``, or ``None``."""
    best = None
    if sign == 0:
        hx, hy = math.sin(th), math.cos(th)
        for nx, ny, b in reg.halfplanes:
            rate = v * (nx * hx + ny * hy)
            if rate <= 1e-15:
                continue
            t = (b - nx * x - ny * y) / rate
            t = max(t, 0.0)
            if t <= horizon and (best is None or t < best):
                best = t
        return best
    R = v / u_max
    cx = x + sign * R * math.cos(th)
    cy = y - sign * R * math.sin(th)
    for nx, ny, b in reg.halfplanes:
        base = nx * cx + ny * cy - b
        k = -base / (sign * R)
        if not -1.0 < k < 1.0:
            continue  # circle misses the line or only touches it
        alpha = math.atan2(nx, ny)
        psi0 = th - alpha
        psi_exit = math.asin(k)  # the root where n.p - b is increasing
        if sign > 0:
            dpsi = (psi_exit - psi0) % TWO_PI
        else:
            dpsi = (psi0 - psi_exit) % TWO_PI
        if dpsi > TWO_PI - 1e-13:
            dpsi = 0.0
        t = dpsi / u_max
        if t == 0.0 and nx * x + ny * y - b < -1e-12:
            continue
        if t <= horizon and (best is None or t < best):
            best = t
    return best


def _next_region(rmap: RegionMap, q: int, x, y, th, sign, v_ref):
    """Region entered when leaving ``q`` at ``(x, y)`` with heading ``th``."""
    hx, hy = math.sin(th), math.cos(th)
    cands = []
    for nb in rmap.neighbors(q):
        e = rmap.shared_edge(q, nb)
        ax, ay = e.a
        bx, by = e.b
        L = e.length
        s = ((x - ax) * (bx - ax) + (y - ay) * (by - ay)) / L
        d = abs((x - ax) * (by - ay) - (y - ay) * (bx - ax)) / L
        if d <= 1e-7 * max(1.0, L) and -1e-9 <= s <= L + 1e-9:
            cands.append(nb)
    if len(cands) == 1:
        return cands[0]
    # at a vertex (or no shared edge): probe slightly ahead
    probe = 1e-7 * max(1.0, v_ref)
    px, py = x + probe * hx, y + probe * hy
    for nb in cands or rmap.neighbors(q):
        if rmap.region(nb).contains(px, py, 1e-12):
            return nb
    return None


def simulate(start: Configuration, sched: ControlSchedule, rmap: RegionMap,
             start_region: Optional[int] = None, max_events: int = 10000) -> Trajectory:
    """Exact piecewise integration of the schedule with region switching."""
    q = start_region
    if q is None:
        q = locate(start.point, rmap)
        if not isinstance(q, int):
            raise LeftDomain(f"start {start.point} is not inside a single region")
    x, y, th = start.x, start.y, start.theta
    t = 0.0
    poses = [(0.0, q, x, y, th)]
    events: list[CrossingEvent] = []
    for sign, dur in sched.entries:
        rem = dur
        while rem > 0.0:
            reg = rmap.region(q)
            te = _exit_time(reg, x, y, th, sign, reg.v, reg.u_max, rem)
            if te is None:
                x, y, th = _propagate_raw(x, y, th, sign, rem, reg.v, reg.u_max)
                t += rem
                rem = 0.0
                poses.append((t, q, x, y, th))
                break
            x, y, th = _propagate_raw(x, y, th, sign, te, reg.v, reg.u_max)
            t += te
            rem -= te
            nq = _next_region(rmap, q, x, y, th, sign, reg.v)
            if nq is None:
                raise LeftDomain(f"trajectory leaves region {q} at ({x:.6g}, {y:.6g}) "
                                 f"into no region at t = {t:.6g}")
            events.append(CrossingEvent(t, q, nq, x, y, th))
            if len(events) > max_events:
                raise LeftDomain("too many crossings; trajectory is grazing a boundary")
            q = nq
            poses.append((t, q, x, y, th))
    return Trajectory(tuple(poses), tuple(events))


# --------------------------------------------------------------------------- search


@dataclass(frozen=True)
class OracleResult:
    time: float
    schedule: ControlSchedule
    endpoint_error: float
    crossings: int
    sequences: int
    per_sequence: dict = field(default_factory=dict, compare=False)


def sign_sequences(K: int) -> list[tuple[int, ...]]:
    """All sign sequences of length 1..K with adjacent entries distinct."""
    out = []
    for n in range(1, K + 1):
        for seq in itertools.product((1, 0, -1), repeat=n):
            if all(a != b for a, b in zip(seq, seq[1:])):
                out.append(seq)
    return out


def _run(rmap, q, x, y, th, signs, durs, max_events=1000):
    """Lean endpoint-only version of :func:`simulate`; ``None`` if the domain is left."""
    events = 0
    for sign, rem in zip(signs, durs):
        while rem > 0.0:
            reg = rmap.region(q)
            te = _exit_time(reg, x, y, th, sign, reg.v, reg.u_max, rem)
            if te is None:
                x, y, th = _propagate_raw(x, y, th, sign, rem, reg.v, reg.u_max)
                break
            x, y, th = _propagate_raw(x, y, th, sign, te, reg.v, reg.u_max)
            rem -= te
            q = _next_region(rmap, q, x, y, th, sign, reg.v)
            events += 1
            if q is None or events > max_events:
                return None
    return x, y, th


class _Problem:
    """Goal residual of one sign sequence as a function of its durations."""

    def __init__(self, scenario, seq):
        self.s = scenario
        self.seq = seq
        self.q0 = scenario.start_region
        if self.q0 is None:
            self.q0 = locate(scenario.start.point, scenario.map)

    def __call__(self, d):
        st, g = self.s.start, self.s.goal
        end = _run(self.s.map, self.q0, st.x, st.y, st.theta, self.seq,
                   [max(float(v), 0.0) for v in d])
        if end is None:
            return np.full(3, 1e3)
        x, y, th = end
        return np.array([x - g.x, y - g.y, math.remainder(th - g.theta, TWO_PI)])

    def jac(self, d, h=1e-7):
        n = len(d)
        J = np.empty((3, n))
        for i in range(n):
            hi = d.copy()
            lo = d.copy()
            hi[i] += h
            lo[i] = max(d[i] - h, 0.0)
            J[:, i] = (self(hi) - self(lo)) / (hi[i] - lo[i])
        return J


def _polish(prob, d, bound, iters=40):
    """Levenberg-Marquardt projection onto the goal constraint within the duration box."""
    d = np.clip(np.asarray(d, dtype=float), 0.0, bound)
    F = prob(d)
    f = float(F @ F)
    lam = 1e-3
    eye = np.eye(len(d))
    for _ in range(iters):
        if f < 1e-26 or F[0] >= 1e3:
            break
        J = prob.jac(d)
        JtJ, g = J.T @ J, J.T @ F
        for _ in range(20):
            try:
                step = np.linalg.solve(JtJ + lam * eye, -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                dn = np.clip(d + step, 0.0, bound)
                Fn = prob(dn)
                fn = float(Fn @ Fn)
                if fn < f:
                    d, F, f = dn, Fn, fn
                    lam = max(lam / 3.0, 1e-12)
                    break
            lam *= 4.0
        else:
            break
    return d


def _scales(scenario):
    """Upper bounds on a single line and arc duration, and a typical total time."""
    regs = scenario.map.regions
    dist = scenario.start.distance_to(scenario.goal)
    v_min = min(r.v for r in regs)
    v_max = max(r.v for r in regs)
    u_min = min(r.u_max for r in regs)
    arc = TWO_PI / u_min
    line = 4.0 * (dist / v_min + arc)
    typical = dist / v_max + 0.5 * arc
    reach = (dist + 4.0 * max(r.r for r in regs)) / v_min
    return line, arc, typical, reach


def _slsqp(prob, d0, bound, restarts=4, maxiter=200):
    """SLSQP on ``min sum(d)`` subject to reaching the goal, warm restarted while it improves."""
    cons = {"type": "eq", "fun": prob, "jac": prob.jac}
    d = np.clip(d0, 0.0, bound)
    best = None
    for _ in range(restarts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(np.sum, d, jac=np.ones_like, method="SLSQP",
                           bounds=list(zip(np.zeros_like(bound), bound)), constraints=[cons],
                           options=dict(maxiter=maxiter, ftol=1e-13))
        d = _polish(prob, np.clip(res.x, 0.0, bound), bound)
        T = float(np.sum(d))
        if best is not None and T > best[0] - 1e-11:
            break
        best = (T, d)
        if res.nit <= 2:
            break
    return best[1]


def _optimize_sequence(scenario, seq, starts, seed, goal_tol, seeds=()):
    """Best feasible durations for one sign sequence: ``(time, durations, error)``."""
    rng = np.random.default_rng([seed, zlib.crc32(repr(seq).encode())])
    line_hi, arc_hi, typical, reach = _scales(scenario)
    bound = np.array([line_hi if s == 0 else arc_hi for s in seq])
    box = np.array([reach if s == 0 else arc_hi for s in seq])
    prob = _Problem(scenario, seq)
    inits = [np.asarray(x, dtype=float) for x in seeds]
    for i in range(starts):
        if i % 2 == 0:
            # independent durations: every arc sweep equally likely
            inits.append(rng.uniform(0.0, 1.0, len(seq)) * box)
        else:
            # a plausible total time split at random
            inits.append(rng.dirichlet(np.ones(len(seq))) * typical * rng.uniform(0.7, 2.0))
    best = (math.inf, None, math.inf)
    for d0 in inits:
        # land on the goal first; with three pieces the solutions are isolated
        # roots and the projection is already the answer
        d = _polish(prob, d0, bound)
        if float(np.max(np.abs(prob(d)))) > goal_tol:
            continue
        if len(seq) > 3:
            d = _slsqp(prob, d, bound, restarts=1, maxiter=50)
            if float(np.max(np.abs(prob(d)))) > goal_tol:
                continue
        if float(np.sum(d)) < best[0]:
            best = (float(np.sum(d)), d, None)
    if best[1] is None:
        return best
    # SLSQP tends to stall just short of the optimum; restart from the best point
    d = _slsqp(prob, best[1], bound)
    err = float(np.max(np.abs(prob(d))))
    T = float(np.sum(d))
    if err <= goal_tol and T <= best[0]:
        return T, d, err
    return best[0], best[1], float(np.max(np.abs(prob(best[1]))))


def _sub_seeds(seq, found):
    """Solutions of the sequences obtained by deleting one entry, re-expanded with a zero."""
    out = []
    for i in range(len(seq)):
        sub = seq[:i] + seq[i + 1:]
        if any(a == b for a, b in zip(sub, sub[1:])):
            continue
        d = found.get(sub)
        if d is not None:
            out.append(np.insert(d, i, 0.0))
    return out


def brute_force_min_time(scenario, K: int = 9, tol: float = 1e-6, starts: int = 32,
                         seed: int = 0, goal_tol: float = 1e-4,
                         sequences: Optional[Sequence[tuple[int, ...]]] = None) -> OracleResult:
    """Best schedule over all sign sequences of length <= K.

    For each sequence the total duration is minimized subject to reaching the
    goal pose: ``starts`` seeded random initial durations, plus the optima of
    its one-shorter subsequences, are projected onto the goal by
    Levenberg-Marquardt steps and then refined by SLSQP.  Deterministic for a
    given seed, and never worse for a larger ``K``.  ``tol`` is the time slack used when ranking sequences,
    so shorter sequences win ties.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    seqs = list(sequences) if sequences is not None else sign_sequences(K)
    seqs.sort(key=len)
    best_T, best_seq, best_d, best_err = math.inf, None, None, math.inf
    per: dict = {}
    found: dict = {}
    for seq in seqs:
        T, d, err = _optimize_sequence(scenario, seq, starts, seed, goal_tol,
                                       _sub_seeds(seq, found))
        per[seq] = T
        if d is not None:
            found[seq] = d
        if T < best_T - tol:
            best_T, best_seq, best_d, best_err = T, seq, d, err
    if best_seq is None:
        raise NoFeasibleFound(f"no schedule with <= {K} pieces reached the goal")
    sched = _compact(best_seq, best_d)
    tr = simulate(scenario.start, sched, scenario.map, scenario.start_region)
    return OracleResult(best_T, sched, best_err, len(tr.events), len(seqs), per)


def _compact(seq, d) -> ControlSchedule:
    ents: list[tuple[int, float]] = []
    for s, di in zip(seq, d):
        if di <= 0.0:
            continue
        if ents and ents[-1][0] == s:
            ents[-1] = (s, ents[-1][1] + float(di))
        else:
            ents.append((s, float(di)))
    return ControlSchedule(tuple(ents))
