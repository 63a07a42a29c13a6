"""Exact single-region Dubins solver.

The six candidate words are built from the usual tangent constructions in
normalized coordinates.  A clockwise arc (``C+``) is a right turn in the
standard x-from-axis angle convention, so e.g. the classic ``RSL`` word is
spelled ``C+ L C-`` here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import TWO_PI, Configuration, Kind, _propagate_raw, spelling
from .path import Phase, PathSolution, Segment

P, M, S = Kind.CPLUS, Kind.CMINUS, Kind.LINE

#: The six Dubins words.
WORDS: tuple[tuple[Kind, Kind, Kind], ...] = (
    (M, P, M), (P, M, P), (M, S, M), (P, S, P), (P, S, M), (M, S, P),
)

# arc sweeps within this many radians of a full turn are clamped to zero
_SWEEP_CLAMP = 1e-10


def _mod2pi(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    if a > TWO_PI - _SWEEP_CLAMP:
        a = 0.0
    return a


@dataclass(frozen=True)
class DubinsCandidate:
    kinds: tuple[Kind, Kind, Kind]
    lengths: tuple[float, float, float]  # per piece, length units

    @property
    def length(self) -> float:
        return self.lengths[0] + self.lengths[1] + self.lengths[2]

    @property
    def word(self) -> tuple[Kind, ...]:
        """Spelling after dropping zero-length pieces (and merging equal neighbours)."""
        out: list[Kind] = []
        for k, ln in zip(self.kinds, self.lengths):
            if ln > 0.0 and (not out or out[-1] is not k):
                out.append(k)
        return tuple(out)

    @property
    def spelling(self) -> str:
        return spelling(self.word)

    def sort_key(self):
        return (self.length, tuple(k.rank for k in self.word))


def _normalized(x0, y0, th0, x1, y1, th1, r):
    dx, dy = x1 - x0, y1 - y0
    d = math.hypot(dx, dy) / r
    # standard angles measured from +x
    line = math.atan2(dy, dx) if d > 0 else 0.0
    a = _mod2pi((0.5 * math.pi - th0) - line)
    b = _mod2pi((0.5 * math.pi - th1) - line)
    return d, a, b


def _word_raw(idx, d, a, b):
    """Unwrapped pieces ``(t, p, q, tmp)`` of word ``idx`` in normalized units.

    ``tmp`` is the feasibility discriminant: for the straight-middle words it is
    the squared normalized line length (feasible when ``>= 0``); for the
    three-arc words it is the cosine argument (feasible when in ``(-1, 1)``).
    Arc pieces are returned before reduction modulo 2 pi.
    """
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    cab = math.cos(a - b)
    if idx == 2:  # LSL -> C- L C-
        tmp = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
        th = math.atan2(cb - ca, d + sa - sb)
        return th - a, math.sqrt(max(tmp, 0.0)), b - th, tmp
    if idx == 3:  # RSR -> C+ L C+
        tmp = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
        th = math.atan2(ca - cb, d - sa + sb)
        return a - th, math.sqrt(max(tmp, 0.0)), th - b, tmp
    if idx == 4:  # RSL -> C+ L C-
        tmp = d * d - 2.0 + 2.0 * cab - 2.0 * d * (sa + sb)
        p = math.sqrt(max(tmp, 0.0))
        th = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return a - th, p, b - th, tmp
    if idx == 5:  # LSR -> C- L C+
        tmp = d * d - 2.0 + 2.0 * cab + 2.0 * d * (sa + sb)
        p = math.sqrt(max(tmp, 0.0))
        th = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return th - a, p, th - b, tmp
    if idx == 1:  # RLR -> C+ C- C+, middle sweep in (pi, 2pi)
        tmp = 0.125 * (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb))
        p = TWO_PI - math.acos(min(1.0, max(-1.0, tmp)))
        th = math.atan2(ca - cb, d - sa + sb)
        t = a - th + 0.5 * p
        return t, p, a - b - t + p, tmp
    # LRL -> C- C+ C-
    tmp = 0.125 * (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa))
    p = TWO_PI - math.acos(min(1.0, max(-1.0, tmp)))
    th = math.atan2(cb - ca, d + sa - sb)
    t = th - a + 0.5 * p
    return t, p, b - a - t + p, tmp


_ORDER = (2, 3, 4, 5, 1, 0)


def _feasible(idx, tmp):
    if idx >= 2:
        return tmp >= -1e-14
    return -1.0 < tmp < 1.0


def _raw_candidates(x0, y0, th0, x1, y1, th1, r):
    """Candidate words as (word index, t, p, q) in normalized lengths."""
    d, a, b = _normalized(x0, y0, th0, x1, y1, th1, r)
    out = []
    for idx in _ORDER:
        t, p, q, tmp = _word_raw(idx, d, a, b)
        if not _feasible(idx, tmp):
            continue
        t = _mod2pi(t)
        if idx < 2:
            # outer sweep of a three-arc word follows from the reduced first sweep
            q = (a - b - t + p) if idx == 1 else (b - a - t + p)
        out.append((idx, t, p, _mod2pi(q)))
    return out


def signed_pieces(idx, x0, y0, th0, x1, y1, th1, r):
    """Smooth per-piece values of one word, for driving pieces to zero.

    Arc pieces are angles wrapped to (-pi, pi] (the three-arc middle sweep is
    left as is); a straight middle piece is represented by its discriminant
    ``tmp`` (normalized squared length, negative when infeasible).
    """
    d, a, b = _normalized(x0, y0, th0, x1, y1, th1, r)
    t, p, q, tmp = _word_raw(idx, d, a, b)
    w = lambda v: math.remainder(v, TWO_PI)  # noqa: E731
    if idx < 2:
        t = w(t)
        q = (a - b - t + p) if idx == 1 else (b - a - t + p)
        return t, p, w(q)
    return w(t), tmp, w(q)


def _endpoint(start: Configuration, kinds, lengths, r):
    x, y, th = start.x, start.y, start.theta
    for k, ln in zip(kinds, lengths):
        # unit speed, angular rate 1/r
        x, y, th = _propagate_raw(x, y, th, k.sign, ln, 1.0, 1.0 / r)
    return x, y, th


def candidates(start: Configuration, goal: Configuration, r: float) -> list[DubinsCandidate]:
    """All feasible words, unsorted and unchecked (hot path for the planner)."""
    out = []
    for idx, t, p, q in _raw_candidates(start.x, start.y, start.theta,
                                        goal.x, goal.y, goal.theta, r):
        out.append(DubinsCandidate(WORDS[idx], (t * r, p * r, q * r)))
    return out


def enumerate_words(start: Configuration, goal: Configuration, r: float,
                    tol: float = 1e-9) -> list[DubinsCandidate]:
    """Every feasible Dubins word joining ``start`` to ``goal``, shortest first.

    Each returned candidate is checked by forward propagation to land on
    ``goal`` within ``tol`` (scaled by ``max(1, r)``).
    """
    if not r > 0:
        raise ValueError(f"turning radius must be positive, got {r}")
    scale = max(1.0, r)
    out = []
    for cand in candidates(start, goal, r):
        x, y, th = _endpoint(start, cand.kinds, cand.lengths, r)
        err = max(math.hypot(x - goal.x, y - goal.y),
                  abs(math.remainder(th - goal.theta, TWO_PI)) * r)
        if err <= tol * scale:
            out.append(cand)
    out.sort(key=DubinsCandidate.sort_key)
    return out


def shortest(start: Configuration, goal: Configuration, r: float) -> DubinsCandidate:
    cands = enumerate_words(start, goal, r)
    if not cands:
        raise RuntimeError("no Dubins word connects the given poses")  # unreachable for r > 0
    best = cands[0]
    for c in cands[1:]:
        if c.length - best.length > 1e-12 * max(1.0, best.length):
            break
        if c.sort_key()[1] < best.sort_key()[1]:
            best = c
    return best


def candidate_phase(start: Configuration, cand: DubinsCandidate, region: int, v: float,
                    r: float) -> Phase:
    segs = tuple(Segment(k, ln / v, region) for k, ln in zip(cand.kinds, cand.lengths)
                 if ln > 0.0)
    return Phase(region, v, v / r, start, segs)


def solve_dubins(start: Configuration, goal: Configuration, r: float, v: float = 1.0,
                 region: int = 0) -> PathSolution:
    """Minimum-length path in a single homogeneous region; time is length / v."""
    best = shortest(start, goal, r)
    return PathSolution((candidate_phase(start, best, region, v, r),), (),
                        best.spelling)
