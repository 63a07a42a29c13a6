"""Boundary-crossing laws: generalized refraction residuals, the Snell limit,
the equal-turning-rate corollary and crossing classification.

All angles in a :class:`CrossingRecord` are expressed in the crossing's
:class:`~hetdubins.geometry.BoundaryFrame`, i.e. measured from the boundary
normal that points into the emergent region.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import BoundaryFrame, Kind, Region, wrap_angle

#: Default tolerance for every residual in this module (dimensionless).
DEFAULT_TOL = 1e-6
#: |theta*| below this counts as perpendicular to the boundary.
PERPENDICULAR_TOL = 1e-6


class DegenerateCrossing(ValueError):
    """The refraction law does not apply to this crossing."""


class TotalInternalReflection(ValueError):
    """No refracted straight line exists for the given incidence."""


class NotStarCase(ValueError):
    """The two regions do not share the same maximum turning rate."""


class MalformedSubpath(ValueError):
    """The supplied pieces do not describe exactly one boundary crossing."""


class GrazingRefraction(UserWarning):
    """The refracted line is tangent to the boundary."""


class CrossingKind(enum.Enum):
    L_PERP = "L⊥"
    L_OBLIQUE = "L"  # only admissible between equal-speed regions
    CPLUS = "C+"
    CMINUS = "C-"
    CPLUS_L = "C+/L"
    CMINUS_L = "C-/L"
    L_CPLUS = "L/C+"
    L_CMINUS = "L/C-"
    CPLUS_CMINUS = "C+/C-"
    CMINUS_CPLUS = "C-/C+"


@dataclass(frozen=True)
class Inadmissible:
    """A crossing matching one of the provably nonoptimal patterns."""

    pattern: str
    reason: str


@dataclass(frozen=True)
class CrossingRecord:
    frame: BoundaryFrame
    theta_star: float
    theta_p: Optional[float]
    theta_pp: Optional[float]
    p: int
    pp: int
    kind: CrossingKind
    junction: int = 0  # index of the phase ending at this crossing

    @property
    def delta_p(self) -> Optional[float]:
        if self.theta_p is None:
            return None
        return wrap_angle(self.theta_star - self.theta_p)

    @property
    def delta_pp(self) -> Optional[float]:
        if self.theta_pp is None:
            return None
        return wrap_angle(self.theta_pp - self.theta_star)

    @property
    def is_lcl(self) -> bool:
        """Arc spanning the boundary with straight pieces on both sides."""
        return (self.kind in (CrossingKind.CPLUS, CrossingKind.CMINUS)
                and self.theta_p is not None and self.theta_pp is not None)

    def negated(self) -> "CrossingRecord":
        """Mirror image: every angle negated and arc orientation swapped."""
        mirror = {
            CrossingKind.CPLUS: CrossingKind.CMINUS, CrossingKind.CMINUS: CrossingKind.CPLUS,
            CrossingKind.CPLUS_L: CrossingKind.CMINUS_L, CrossingKind.CMINUS_L: CrossingKind.CPLUS_L,
            CrossingKind.L_CPLUS: CrossingKind.L_CMINUS, CrossingKind.L_CMINUS: CrossingKind.L_CPLUS,
            CrossingKind.CPLUS_CMINUS: CrossingKind.CMINUS_CPLUS,
            CrossingKind.CMINUS_CPLUS: CrossingKind.CPLUS_CMINUS,
        }
        return CrossingRecord(
            self.frame, -self.theta_star,
            None if self.theta_p is None else -self.theta_p,
            None if self.theta_pp is None else -self.theta_pp,
            self.p, self.pp, mirror.get(self.kind, self.kind), self.junction)


def _require_lcl(rec: CrossingRecord) -> tuple[float, float, float, float]:
    if not rec.is_lcl:
        raise DegenerateCrossing(
            f"crossing {rec.p}->{rec.pp} of kind {rec.kind.value} is not an L C L crossing")
    return rec.theta_p, rec.theta_pp, rec.delta_p, rec.delta_pp  # type: ignore[return-value]


def refraction_residuals(rec: CrossingRecord, p: Region, pp: Region,
                         eps: float = 1e-12) -> tuple[float, float]:
    """Dimensionless residuals ``(rho_v, rho_r)`` of the generalized refraction law.

    ``rho_v = (v_p sin th_p' - v_p' sin th_p) / max(v_p, v_p')`` and
    ``rho_r = (r_p v_p' (1 - cos dth_p) - r_p' v_p (1 - cos dth_p')) / max term``.
    """
    th_p, th_pp, d_p, d_pp = _require_lcl(rec)
    if abs(math.sin(th_pp)) <= eps:
        raise DegenerateCrossing("emergent line is perpendicular to the boundary (sin = 0)")
    one_p = 1.0 - math.cos(d_p)
    if one_p <= eps * eps:
        raise DegenerateCrossing("incident turn angle is zero (1 - cos = 0)")
    rho_v = (p.v * math.sin(th_pp) - pp.v * math.sin(th_p)) / max(p.v, pp.v)
    a = p.r * pp.v * one_p
    b = pp.r * p.v * (1.0 - math.cos(d_pp))
    rho_r = (a - b) / max(abs(a), abs(b))
    return rho_v, rho_r


def recovered_ratios(rec: CrossingRecord) -> tuple[float, float]:
    """Speed and radius ratios ``(v_p/v_p', r_p/r_p')`` implied by the crossing angles."""
    th_p, th_pp, d_p, d_pp = _require_lcl(rec)
    s_pp = math.sin(th_pp)
    one_p = 1.0 - math.cos(d_p)
    if abs(s_pp) <= 1e-12 or one_p <= 1e-24:
        raise DegenerateCrossing("ratios undefined for this crossing")
    v_ratio = math.sin(th_p) / s_pp
    return v_ratio, v_ratio * (1.0 - math.cos(d_pp)) / one_p


def snell_exit_angle(theta_p: float, v_p: float, v_pp: float) -> float:
    """Refracted line heading from ``v_p / v_p' = sin th_p / sin th_p'``."""
    s = (v_pp / v_p) * math.sin(theta_p)
    if abs(s) > 1.0 + 1e-12:
        raise TotalInternalReflection(
            f"|sin th_p'| = {abs(s):.6g} > 1: no refracted line for th_p = {theta_p:.6g}")
    if abs(s) >= 1.0 - 1e-12:
        warnings.warn("refracted line grazes the boundary", GrazingRefraction, stacklevel=2)
        s = math.copysign(1.0, s)
    return math.asin(s)


@dataclass(frozen=True)
class StarCheck:
    passed: bool
    residual: float
    tol: float


def check_star_case(rec: CrossingRecord, p: Region, pp: Region,
                    tol: float = DEFAULT_TOL) -> StarCheck:
    """Equal turning rates imply equal turn angles on both sides of the boundary."""
    if abs(p.u_max - pp.u_max) > 1e-9 * max(p.u_max, pp.u_max):
        raise NotStarCase(f"u_max differs: {p.u_max:.6g} vs {pp.u_max:.6g}")
    _, _, d_p, d_pp = _require_lcl(rec)
    res = abs(wrap_angle(d_p - d_pp))
    return StarCheck(res <= tol, res, tol)


# --------------------------------------------------------------------------- classification


def _reduce(kinds: Sequence[Kind]) -> list[Kind]:
    out: list[Kind] = []
    for k in kinds:
        if not out or out[-1] is not k:
            out.append(k)
    return out


def classify_crossing(before: Sequence[tuple[Kind, float]], after: Sequence[tuple[Kind, float]],
                      theta_star: float, v_p: float, v_pp: float,
                      zero_tol: float = 1e-9, perp_tol: float = PERPENDICULAR_TOL):
    """Crossing kind for the pieces just before and just after the boundary.

    ``before`` and ``after`` are ``(kind, duration)`` pairs of the incident and
    emergent phases; pieces no longer than ``zero_tol`` are dropped.  Returns a
    :class:`CrossingKind` or an :class:`Inadmissible` naming the matched
    nonoptimal pattern.
    """
    b = _reduce([k for k, d in before if d > zero_tol])
    a = _reduce([k for k, d in after if d > zero_tol])
    if not b or not a:
        raise MalformedSubpath("crossing needs a nonzero piece on each side of the boundary")
    last, first = b[-1], a[0]
    prev = b[-2] if len(b) > 1 else None
    nxt = a[1] if len(a) > 1 else None
    L = Kind.LINE
    if last is L and first is L:
        perp = min(abs(wrap_angle(theta_star)), abs(wrap_angle(theta_star - math.pi))) <= perp_tol
        if perp:
            return CrossingKind.L_PERP
        if not math.isclose(v_p, v_pp, rel_tol=1e-12):
            return Inadmissible("C L_{p-p'} C", "straight crossing not orthogonal to the boundary "
                                "between regions of different speed")
        return CrossingKind.L_OBLIQUE
    if last is first:
        return CrossingKind.CPLUS if last is Kind.CPLUS else CrossingKind.CMINUS
    if first is L:
        if prev is L:
            return Inadmissible("L_p C_p L_p'", "turn ends exactly on the boundary between two lines")
        return CrossingKind.CPLUS_L if last is Kind.CPLUS else CrossingKind.CMINUS_L
    if last is L:
        if nxt is L:
            return Inadmissible("L_p C_p' L_p'", "turn starts exactly on the boundary between two lines")
        return CrossingKind.L_CPLUS if first is Kind.CPLUS else CrossingKind.L_CMINUS
    # opposite arcs meeting on the boundary
    if prev is L and nxt is L:
        return Inadmissible("L_p C_p C_p' L_p'", "turn direction switches on the boundary between two lines")
    return CrossingKind.CPLUS_CMINUS if last is Kind.CPLUS else CrossingKind.CMINUS_CPLUS


def is_admissible(kind) -> bool:
    return isinstance(kind, CrossingKind)
