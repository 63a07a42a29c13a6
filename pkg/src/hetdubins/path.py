"""Piecewise C+/C-/L paths over a hybrid time domain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

from .geometry import Configuration, Kind, _propagate_raw, spelling


@dataclass(frozen=True)
class Segment:
    kind: Kind
    duration: float
    region: int

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration}")


@dataclass(frozen=True)
class Phase:
    """Maximal subpath inside one region."""

    region: int
    v: float
    u_max: float
    start: Configuration
    segments: tuple[Segment, ...]

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def length(self) -> float:
        return self.v * self.duration

    @property
    def end(self) -> Configuration:
        x, y, th = self.start.x, self.start.y, self.start.theta
        for s in self.segments:
            x, y, th = _propagate_raw(x, y, th, s.kind.sign, s.duration, self.v, self.u_max)
        return Configuration(x, y, th)

    def nonzero_segments(self, eps: float = 1e-7) -> list[Segment]:
        return [s for s in self.segments if s.duration > eps]

    def segment_starts(self) -> list[Configuration]:
        out = []
        x, y, th = self.start.x, self.start.y, self.start.theta
        for s in self.segments:
            out.append(Configuration(x, y, th))
            x, y, th = _propagate_raw(x, y, th, s.kind.sign, s.duration, self.v, self.u_max)
        return out


@dataclass(frozen=True)
class Sample:
    t: float
    j: int
    q: int
    x: float
    y: float
    theta: float
    u: float
    kind: Kind


@dataclass(frozen=True)
class PathSolution:
    phases: tuple[Phase, ...]
    crossings: tuple = field(default=())  # CrossingRecord per phase junction
    family: str = ""

    @property
    def total_time(self) -> float:
        return sum(p.duration for p in self.phases)

    @property
    def regions(self) -> list[int]:
        return [p.region for p in self.phases]

    @property
    def route(self) -> str:
        return "-".join(str(q) for q in self.regions)

    @property
    def start(self) -> Configuration:
        return self.phases[0].start

    @property
    def end(self) -> Configuration:
        return self.phases[-1].end

    @property
    def length(self) -> float:
        return sum(p.length for p in self.phases)

    def time_domain(self) -> list[tuple[float, float, int]]:
        """Intervals ``(t_j, t_{j+1}, j)`` of the hybrid time domain."""
        out = []
        t = 0.0
        for j, p in enumerate(self.phases):
            out.append((t, t + p.duration, j))
            t += p.duration
        return out

    def spelling(self) -> str:
        """Piece spelling with a ``|`` at each region crossing."""
        out = []
        for p in self.phases:
            kinds: list[Kind] = []
            for s in p.nonzero_segments():
                if not kinds or kinds[-1] is not s.kind:
                    kinds.append(s.kind)
            out.append(spelling(kinds))
        return "|".join(out)

    def iter_segments(self) -> Iterator[tuple[int, Phase, Segment, Configuration, float]]:
        """Yield ``(j, phase, segment, start pose, start time)`` for every segment."""
        t = 0.0
        for j, p in enumerate(self.phases):
            for s, c in zip(p.segments, p.segment_starts()):
                yield j, p, s, c, t
                t += s.duration

    def sample(self, per_segment: int = 100, skip_zero: bool = True) -> list[Sample]:
        """Poses at ``per_segment + 1`` evenly spaced instants of every segment (ends included)."""
        out = []
        for j, p, s, c, t0 in self.iter_segments():
            if skip_zero and s.duration <= 0.0:
                continue
            u = s.kind.sign * p.u_max
            n = max(1, per_segment)
            for i in range(n + 1):
                tau = s.duration * i / n
                x, y, th = _propagate_raw(c.x, c.y, c.theta, s.kind.sign, tau, p.v, p.u_max)
                out.append(Sample(t0 + tau, j, p.region, x, y, th, u, s.kind))
        return out


def path_time(p: PathSolution) -> float:
    """Total traversal time: sum of all segment durations."""
    return p.total_time


def continuity_gap(p: PathSolution) -> float:
    """Largest position/heading jump between consecutive phases."""
    worst = 0.0
    for a, b in zip(p.phases, p.phases[1:]):
        e = a.end
        s = b.start
        dth = abs(math.remainder(e.theta - s.theta, 2 * math.pi))
        worst = max(worst, math.hypot(e.x - s.x, e.y - s.y), dth)
    return worst
