"""Adjoint reconstruction and necessary-condition grading.

Within phase ``j`` the position costate ``(lx_j, ly_j)`` is constant and the
heading costate has the closed form ``l_theta = ly_j * x - lx_j * y + k_j``:
integrating ``dl_theta/dt = -lx v cos(theta) + ly v sin(theta)`` along any
piece gives ``ly * dx - lx * dy`` because ``dx/dt = v sin(theta)`` and
``dy/dt = v cos(theta)``.  Every condition on the adjoint is therefore
linear in the ``3 J`` unknowns ``(lx_j, ly_j, k_j)``.

Normalization: ``lambda0 = 1`` and ``c = 0``, so the maximized Hamiltonian
``lx v sin + ly v cos + l_theta u`` equals 1 along the whole path.  The
costate is defined in the maximum-principle sign convention; solvers that
minimize ``lambda0 + lambda . f`` report the negated values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .geometry import BoundaryFrame, Configuration, Kind, Region, _propagate_raw
from .path import PathSolution, Phase, continuity_gap
from .planner import arc_excursion, crossing_record
from .refraction import (
    CrossingKind, DegenerateCrossing, Inadmissible, NotStarCase, check_star_case,
    refraction_residuals,
)

DEFAULT_TOL = 1e-6
JUMP_TOL = 1e-9
ZERO_PIECE = 1e-7


class ReconstructionFailed(RuntimeError):
    """No adjoint satisfies the necessary conditions within tolerance."""

    def __init__(self, msg: str, residual: float = math.nan):
        super().__init__(msg)
        self.residual = residual


def hamiltonian(xi: Configuration, lam: tuple[float, float, float], lam0: float, u: float,
                region: Region) -> float:
    """``H = lx v sin(theta) + ly v cos(theta) + l_theta u - lambda0``."""
    lx, ly, lt = lam
    return (lx * region.v * math.sin(xi.theta) + ly * region.v * math.cos(xi.theta)
            + lt * u - lam0)


@dataclass(frozen=True)
class Piece:
    """Merged nonzero piece of a phase, with its exact endpoints."""

    phase: int
    kind: Kind
    duration: float
    start: Configuration
    end: Configuration
    v: float
    u_max: float

    @property
    def u(self) -> float:
        return self.kind.sign * self.u_max


def pieces_of(phase: Phase, j: int, zero_tol: float = ZERO_PIECE) -> list[Piece]:
    out: list[Piece] = []
    for s, c in zip(phase.segments, phase.segment_starts()):
        x, y, th = _propagate_raw(c.x, c.y, c.theta, s.kind.sign, s.duration, phase.v, phase.u_max)
        end = Configuration(x, y, th)
        if s.duration <= zero_tol:
            if out:  # keep geometric continuity: extend the previous piece's end
                p = out[-1]
                out[-1] = Piece(j, p.kind, p.duration, p.start, end, p.v, p.u_max)
            continue
        if out and out[-1].kind is s.kind:
            p = out[-1]
            out[-1] = Piece(j, p.kind, p.duration + s.duration, p.start, end, p.v, p.u_max)
        else:
            out.append(Piece(j, s.kind, s.duration, c, end, phase.v, phase.u_max))
    return out


@dataclass(frozen=True)
class AdjointTrajectory:
    origin: tuple[float, float]
    lam: tuple[tuple[float, float], ...]  # (lx_j, ly_j) per phase, map frame
    k: tuple[float, ...]
    lam0: float
    c: float
    abnormal: bool
    residual: float
    margin: float

    def lambda_theta(self, j: int, x: float, y: float) -> float:
        lx, ly = self.lam[j]
        return ly * (x - self.origin[0]) - lx * (y - self.origin[1]) + self.k[j]

    def costate(self, j: int, c: Configuration) -> tuple[float, float, float]:
        lx, ly = self.lam[j]
        return lx, ly, self.lambda_theta(j, c.x, c.y)

    def in_frame(self, frame: BoundaryFrame) -> list[tuple[float, float]]:
        """Position costate of every phase expressed in a boundary frame.

        In the frame of a crossing, the first component is continuous across
        that crossing and only the second one jumps.
        """
        cp, sp = math.cos(frame.phi), math.sin(frame.phi)
        return [(cp * lx - sp * ly, sp * lx + cp * ly) for lx, ly in self.lam]

    def sample(self, path: PathSolution, per_segment: int = 100) -> np.ndarray:
        """Rows ``(t, j, l_theta)`` at the path's sample instants."""
        return np.array([(s.t, s.j, self.lambda_theta(s.j, s.x, s.y))
                         for s in path.sample(per_segment)])

    def negated(self) -> "AdjointTrajectory":
        """Values in the minimization sign convention used by direct solvers."""
        return AdjointTrajectory(self.origin, tuple((-a, -b) for a, b in self.lam),
                                 tuple(-v for v in self.k), self.lam0, self.c, self.abnormal,
                                 self.residual, self.margin)


class _System:
    """Linear rows over ``z = (lx_0, ly_0, k_0, lx_1, ...)`` in Hamiltonian units."""

    def __init__(self, nphase: int, origin):
        self.n = 3 * nphase
        self.ox, self.oy = origin
        self.hard: list[np.ndarray] = []
        self.soft: list[tuple[np.ndarray, float, str]] = []

    def lt_row(self, j, x, y, scale=1.0):
        a = np.zeros(self.n)
        a[3 * j] = -(y - self.oy) * scale
        a[3 * j + 1] = (x - self.ox) * scale
        a[3 * j + 2] = scale
        return a

    def h_row(self, j, c: Configuration, v, u):
        a = self.lt_row(j, c.x, c.y, u)
        a[3 * j] += v * math.sin(c.theta)
        a[3 * j + 1] += v * math.cos(c.theta)
        return a

    def singular_row(self, j, theta, v):
        a = np.zeros(self.n)
        a[3 * j] = -v * math.cos(theta)
        a[3 * j + 1] = v * math.sin(theta)
        return a


def _build(path: PathSolution, region_map) -> tuple[_System, list[list[Piece]]]:
    origin = path.start.point
    sysm = _System(len(path.phases), origin)
    allp = [pieces_of(ph, j) for j, ph in enumerate(path.phases)]
    for j, pcs in enumerate(allp):
        for i, pc in enumerate(pcs):
            sysm.soft.append((sysm.h_row(j, pc.start, pc.v, pc.u), 1.0, "H"))
            sysm.soft.append((sysm.h_row(j, pc.end, pc.v, pc.u), 1.0, "H"))
            if pc.kind is Kind.LINE:
                sysm.soft.append((sysm.lt_row(j, pc.start.x, pc.start.y, pc.u_max), 0.0, "L"))
                sysm.soft.append((sysm.singular_row(j, pc.start.theta, pc.v), 0.0, "L"))
            if i + 1 < len(pcs) and pcs[i + 1].kind is not pc.kind:
                sysm.soft.append((sysm.lt_row(j, pc.end.x, pc.end.y, pc.u_max), 0.0, "switch"))
    for j in range(len(path.phases) - 1):
        a, b = path.phases[j], path.phases[j + 1]
        c = b.start
        sysm.hard.append(sysm.lt_row(j, c.x, c.y) - sysm.lt_row(j + 1, c.x, c.y))
        e = region_map.shared_edge(a.region, b.region)
        tx, ty = e.b[0] - e.a[0], e.b[1] - e.a[1]
        norm = math.hypot(tx, ty)
        row = np.zeros(sysm.n)
        row[3 * j], row[3 * j + 1] = tx / norm, ty / norm
        row[3 * (j + 1)], row[3 * (j + 1) + 1] = -tx / norm, -ty / norm
        sysm.hard.append(row)
        if allp[j] and allp[j + 1] and allp[j][-1].kind is not allp[j + 1][0].kind:
            um = max(a.u_max, b.u_max)
            sysm.soft.append((sysm.lt_row(j, c.x, c.y, um), 0.0, "switch"))
    return sysm, allp


def _arc_samples(sysm: _System, allp, n=24):
    """Rows giving ``sign(u) * l_theta * u_max`` at interior arc instants."""
    rows = []
    for pcs in allp:
        for pc in pcs:
            if pc.kind is Kind.LINE:
                continue
            for i in range(1, n):
                tau = pc.duration * i / n
                x, y, _ = _propagate_raw(pc.start.x, pc.start.y, pc.start.theta, pc.kind.sign,
                                         tau, pc.v, pc.u_max)
                rows.append(sysm.lt_row(pc.phase, x, y, pc.kind.sign * pc.u_max))
    return np.array(rows).reshape(-1, sysm.n)


def reconstruct_adjoint(path: PathSolution, scenario, tol: float = DEFAULT_TOL) -> AdjointTrajectory:
    """Adjoint pair consistent with the path's bang-singular structure.

    Crossing conditions (continuous ``l_theta`` and tangential costate) are
    imposed exactly; Hamiltonian, singular-arc and switching rows are solved
    in least squares.  Remaining freedom is spent maximizing the sign margin
    of ``l_theta`` on the arcs.  Raises :class:`ReconstructionFailed` when the
    least-squares residual exceeds ``tol`` for both the normal
    (``lambda0 = 1``) and the abnormal (``lambda0 = 0``) multiplier.
    """
    region_map = scenario.map
    sysm, allp = _build(path, region_map)
    n = sysm.n
    N = null_space(np.array(sysm.hard)) if sysm.hard else np.eye(n)
    S = np.array([r for r, _, _ in sysm.soft]).reshape(-1, n)
    rhs = np.array([b for _, b, _ in sysm.soft])
    SN = S @ N
    w, *_ = np.linalg.lstsq(SN, rhs, rcond=None)
    res = SN @ w - rhs
    resid = float(np.max(np.abs(res))) if len(res) else 0.0
    abnormal = False
    if resid > tol:
        # abnormal multiplier: nontrivial solution of the homogeneous system
        if SN.shape[0] and SN.shape[1]:
            _, sv, vt = np.linalg.svd(SN)
            w0 = vt[-1]
            r0 = float(np.max(np.abs(SN @ w0))) / max(1e-300, float(np.max(np.abs(N @ w0))))
            if r0 <= tol and (len(sv) < SN.shape[1] or sv[-1] <= tol):
                w, resid, abnormal = w0, r0, True
        if not abnormal:
            raise ReconstructionFailed(
                f"necessary-condition residual {resid:.3e} exceeds tolerance {tol:.1e}", resid)
    z = N @ w
    # spend any null-space freedom on the arc sign margin
    arc = _arc_samples(sysm, allp)
    margin = float(np.min(arc @ z)) if len(arc) else math.inf
    if len(arc) and SN.shape[1]:
        u_, sv, vt = np.linalg.svd(SN) if SN.shape[0] else (None, np.zeros(0), np.eye(SN.shape[1]))
        rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if len(sv) else 1.0)))
        Z = vt[rank:].T
        if Z.shape[1]:
            A = arc @ N @ Z
            base = arc @ z
            bound = 10.0 * (1.0 + float(np.max(np.abs(z))))
            d = Z.shape[1]
            # maximize m subject to base + A y >= m
            cobj = np.zeros(d + 1)
            cobj[-1] = -1.0
            A_ub = np.hstack([-A, np.ones((A.shape[0], 1))])
            lp = linprog(cobj, A_ub=A_ub, b_ub=base, bounds=[(-bound, bound)] * d + [(None, None)],
                         method="highs")
            if lp.status == 0 and -lp.fun > margin:
                z = z + N @ Z @ lp.x[:d]
                margin = float(-lp.fun)
    lam = tuple((float(z[3 * j]), float(z[3 * j + 1])) for j in range(len(path.phases)))
    ks = tuple(float(z[3 * j + 2]) for j in range(len(path.phases)))
    lam0 = 0.0 if abnormal else 1.0
    adj = AdjointTrajectory(path.start.point, lam, ks, lam0, 0.0, abnormal, resid, margin)
    # report c as the sampled mean of H (zero by normalization up to residuals)
    hs = [_h_value(adj, path, s) for s in path.sample(8)]
    c = float(np.mean(hs)) if hs else 0.0
    return AdjointTrajectory(adj.origin, lam, ks, lam0, c, abnormal, resid, margin)


def _h_value(adj: AdjointTrajectory, path: PathSolution, s) -> float:
    ph = path.phases[s.j]
    lx, ly = adj.lam[s.j]
    lt = adj.lambda_theta(s.j, s.x, s.y)
    return lx * ph.v * math.sin(s.theta) + ly * ph.v * math.cos(s.theta) + lt * s.u - adj.lam0


# --------------------------------------------------------------------------- report


@dataclass(frozen=True)
class ConditionResult:
    id: str
    residual: float
    tol: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "residual": _num(self.residual), "tol": self.tol,
                "pass": self.passed, "note": self.note}


def _num(x: float):
    return None if not math.isfinite(x) else float(x)


@dataclass
class VerificationReport:
    entries: list[ConditionResult] = field(default_factory=list)
    adjoint: Optional[AdjointTrajectory] = None

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, cid: str) -> ConditionResult:
        for e in self.entries:
            if e.id == cid:
                return e
        raise KeyError(cid)

    def add(self, cid, residual, tol, note="", passed=None):
        ok = (residual <= tol) if passed is None else passed
        self.entries.append(ConditionResult(cid, float(residual), float(tol), bool(ok), note))

    def to_dict(self) -> dict:
        out = {"pass": self.passed, "conditions": [e.to_dict() for e in self.entries]}
        if self.adjoint is not None:
            a = self.adjoint
            out["adjoint"] = {
                "convention": "maximum principle, lambda0 = 1 normalization",
                "lambda0": a.lam0, "c": a.c, "abnormal": a.abnormal,
                "lambda_xy": [list(v) for v in a.lam], "k": list(a.k),
                "origin": list(a.origin), "residual": a.residual,
                "arc_sign_margin": _num(a.margin),
            }
        return out


def verify(path: PathSolution, scenario, tol: float = DEFAULT_TOL, jump_tol: float = JUMP_TOL,
           per_segment: int = 100) -> VerificationReport:
    """Grade a path against every implemented necessary condition."""
    rep = VerificationReport()
    region_map = scenario.map
    g = scenario.goal
    end = path.end
    end_err = max(math.hypot(end.x - g.x, end.y - g.y),
                  abs(math.remainder(end.theta - g.theta, 2 * math.pi)))
    rep.add("endpoints", end_err, tol, "distance to goal pose")
    rep.add("path_continuity", continuity_gap(path), jump_tol, "pose jump at crossings")

    # region containment and boundary sliding
    worst = -math.inf
    sliding = 0.0
    for ph in path.phases:
        reg = region_map.region(ph.region)
        for s, c in zip(ph.segments, ph.segment_starts()):
            if s.duration <= 0:
                continue
            if s.kind is Kind.LINE:
                x1, y1, _ = _propagate_raw(c.x, c.y, c.theta, 0, s.duration, ph.v, ph.u_max)
                worst = max(worst, reg.signed_distance(x1, y1), reg.signed_distance(c.x, c.y))
                for nx, ny, b in reg.halfplanes:
                    if (abs(nx * c.x + ny * c.y - b) <= 1e-9 and abs(nx * x1 + ny * y1 - b) <= 1e-9
                            and s.duration * ph.v > 1e-9):
                        sliding = max(sliding, s.duration * ph.v)
            else:
                r = ph.v / ph.u_max
                worst = max(worst, arc_excursion(reg.halfplanes, c.x, c.y, c.theta, s.kind.sign,
                                                 s.duration * ph.u_max, r))
    rep.add("region_containment", max(0.0, worst), tol, "largest excursion outside phase region")
    rep.add("boundary_contact", sliding, 0.0, "length of straight pieces lying along an edge")

    # admissibility of crossings and piece counts
    bad = []
    for j, (a, b) in enumerate(zip(path.phases, path.phases[1:])):
        if a.region == b.region:
            bad.append(f"phases {j},{j + 1} share region {a.region}")
            continue
        _, kind = crossing_record(region_map, a, b, j)
        if isinstance(kind, Inadmissible):
            bad.append(f"crossing {j}: {kind.pattern}")
    for j, ph in enumerate(path.phases):
        if len(pieces_of(ph, j)) > 3:
            bad.append(f"phase {j} has more than three pieces")
    rep.add("family_admissibility", float(len(bad)), 0.0, "; ".join(bad) or "all crossings admissible")

    # L crossings between regions of different speed must be perpendicular
    perp = 0.0
    for rec, (a, b) in zip(path.crossings, zip(path.phases, path.phases[1:])):
        if rec.kind in (CrossingKind.L_PERP, CrossingKind.L_OBLIQUE) and not math.isclose(a.v, b.v):
            perp = max(perp, min(abs(math.remainder(rec.theta_star, math.pi)), math.pi))
    rep.add("l_crossing_perpendicular", perp, tol, "|theta*| mod pi for straight crossings")

    # refraction and equal-turning-rate corollary
    rho, star, n_lcl, n_star = 0.0, 0.0, 0, 0
    for rec in path.crossings:
        if not rec.is_lcl:
            continue
        p, pp = region_map.region(rec.p), region_map.region(rec.pp)
        try:
            rv, rr = refraction_residuals(rec, p, pp)
        except DegenerateCrossing:
            continue
        n_lcl += 1
        rho = max(rho, abs(rv), abs(rr))
        try:
            star = max(star, check_star_case(rec, p, pp, tol).residual)
            n_star += 1
        except NotStarCase:
            pass
    rep.add("refraction_law", rho, tol, f"{n_lcl} L C L crossing(s)")
    rep.add("star_case", star, tol, f"{n_star} crossing(s) with equal turning rate")

    # adjoint conditions
    try:
        adj = reconstruct_adjoint(path, scenario, tol)
    except ReconstructionFailed as exc:
        rep.add("adjoint_reconstruction", exc.residual, tol, str(exc), passed=False)
        for cid in ("hamiltonian_constancy", "control_law", "singular_arc", "adjoint_jump"):
            rep.add(cid, math.inf, tol, "no adjoint", passed=False)
        return rep
    rep.adjoint = adj
    rep.add("adjoint_reconstruction", adj.residual, tol,
            "abnormal multiplier (lambda0 = 0)" if adj.abnormal else "lambda0 = 1, c = 0")
    samples = path.sample(per_segment)
    hdev = max((abs(_h_value(adj, path, s) - adj.c) for s in samples), default=0.0)
    rep.add("hamiltonian_constancy", hdev / (1.0 + abs(adj.c)), tol, f"c = {adj.c:.3e}")

    ctrl, sing = 0.0, 0.0
    allp = [pieces_of(ph, j) for j, ph in enumerate(path.phases)]
    for j, pcs in enumerate(allp):
        for i, pc in enumerate(pcs):
            lx, ly = adj.lam[j]
            if pc.kind is Kind.LINE:
                sing = max(sing, abs(lx * math.cos(pc.start.theta) - ly * math.sin(pc.start.theta)) * pc.v)
                for c in (pc.start, pc.end):
                    sing = max(sing, abs(adj.lambda_theta(j, c.x, c.y)) * pc.u_max)
                continue
            for q in range(per_segment + 1):
                tau = pc.duration * q / per_segment
                x, y, _ = _propagate_raw(pc.start.x, pc.start.y, pc.start.theta, pc.kind.sign,
                                         tau, pc.v, pc.u_max)
                ctrl = max(ctrl, -pc.kind.sign * adj.lambda_theta(j, x, y) * pc.u_max)
            if i + 1 < len(pcs) and pcs[i + 1].kind is not pc.kind:
                ctrl = max(ctrl, abs(adj.lambda_theta(j, pc.end.x, pc.end.y)) * pc.u_max)
    rep.add("control_law", ctrl, tol, "sign(l_theta) = sign(u) on arcs, l_theta = 0 at switches")
    rep.add("singular_arc", sing, tol, "l_theta = 0 and costate along the heading on lines")

    jump = 0.0
    for j, (a, b) in enumerate(zip(path.phases, path.phases[1:])):
        c = b.start
        jump = max(jump, abs(adj.lambda_theta(j, c.x, c.y) - adj.lambda_theta(j + 1, c.x, c.y)))
        e = region_map.shared_edge(a.region, b.region)
        tx, ty = e.b[0] - e.a[0], e.b[1] - e.a[1]
        nrm = math.hypot(tx, ty)
        (l0x, l0y), (l1x, l1y) = adj.lam[j], adj.lam[j + 1]
        jump = max(jump, abs(((l0x - l1x) * tx + (l0y - l1y) * ty) / nrm))
    rep.add("adjoint_jump", jump, jump_tol, "l_theta and tangential costate continuous at crossings")
    return rep
