"""Planar primitives: poses, convex regions, region maps and boundary frames.

Headings follow the vehicle convention used throughout the package: ``theta``
is measured from the +y axis, so the unit velocity is ``(sin theta, cos theta)``
and a positive angular rate turns the heading from +y toward +x (clockwise).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

TWO_PI = 2.0 * math.pi

#: Point-on-edge tolerance used by :func:`locate` (length units).
EDGE_TOL = 1e-9


class GeometryError(ValueError):
    """A region or region map violates one of its invariants."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def heading_vector(theta: float) -> tuple[float, float]:
    return math.sin(theta), math.cos(theta)


def heading_of(dx: float, dy: float) -> float:
    """Heading (from +y, clockwise) of the direction ``(dx, dy)``."""
    return math.atan2(dx, dy)


@dataclass(frozen=True)
class Configuration:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def point(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, other: "Configuration") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def mirrored(self) -> "Configuration":
        """Reflection across the y-axis."""
        return Configuration(-self.x, self.y, -self.theta)


class Kind(enum.Enum):
    """Piece type: clockwise arc, counter-clockwise arc or straight line."""

    CPLUS = "C+"
    CMINUS = "C-"
    LINE = "L"

    @property
    def sign(self) -> int:
        return _KIND_SIGN[self]

    @property
    def rank(self) -> int:
        # lexicographic order used for tie-breaking: C- < C+ < L
        return _KIND_RANK[self]

    def mirrored(self) -> "Kind":
        return _KIND_MIRROR[self]

    @classmethod
    def from_sign(cls, s: int) -> "Kind":
        return {1: cls.CPLUS, -1: cls.CMINUS, 0: cls.LINE}[int(s)]


_KIND_SIGN = {Kind.CPLUS: 1, Kind.CMINUS: -1, Kind.LINE: 0}
_KIND_RANK = {Kind.CMINUS: 0, Kind.CPLUS: 1, Kind.LINE: 2}
_KIND_MIRROR = {Kind.CPLUS: Kind.CMINUS, Kind.CMINUS: Kind.CPLUS, Kind.LINE: Kind.LINE}


def spelling(kinds: Iterable[Kind]) -> str:
    return "".join(k.value for k in kinds)


def propagate(c: Configuration, kind: Kind, duration: float, v: float,
              u_max: float) -> Configuration:
    """Closed-form endpoint after holding ``u = sign(kind) * u_max`` for ``duration``."""
    if duration < 0:
        raise ValueError(f"negative duration {duration!r}")
    x, y, th = _propagate_raw(c.x, c.y, c.theta, kind.sign, duration, v, u_max)
    return Configuration(x, y, th)


def _propagate_raw(x: float, y: float, th: float, sign: int, duration: float,
                   v: float, u_max: float) -> tuple[float, float, float]:
    if sign == 0 or duration == 0.0:
        return (x + v * duration * math.sin(th),
                y + v * duration * math.cos(th), th)
    w = sign * u_max
    dth = w * duration
    th1 = th + dth
    # cos(a) - cos(b) and sin(b) - sin(a) in product form for accuracy on short arcs
    mid = th + 0.5 * dth
    s = math.sin(0.5 * dth)
    rad = v / w
    return (x + 2.0 * rad * math.sin(mid) * s,
            y + 2.0 * rad * math.cos(mid) * s, th1)


def arc_center(c: Configuration, sign: int, radius: float) -> tuple[float, float]:
    """Center of the turning circle of radius ``radius`` for a C+ (sign=1) or C- arc."""
    # heading (sin th, cos th); right-hand normal is (cos th, -sin th)
    return (c.x + sign * radius * math.cos(c.theta),
            c.y - sign * radius * math.sin(c.theta))


# --------------------------------------------------------------------------- regions


def _signed_area(vertices: Sequence[tuple[float, float]]) -> float:
    a = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


@dataclass(frozen=True)
class Region:
    """Convex counter-clockwise polygon with a travel speed and turning radius."""

    id: int
    vertices: tuple[tuple[float, float], ...]
    v: float
    r: float

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "r", float(self.r))
        if not self.v > 0:
            raise GeometryError(f"region {self.id}: speed must be positive, got {self.v}")
        if not self.r > 0:
            raise GeometryError(f"region {self.id}: turning radius must be positive, got {self.r}")
        n = len(verts)
        if n < 3:
            raise GeometryError(f"region {self.id}: polygon needs at least 3 vertices")
        for i in range(n):
            if math.dist(verts[i], verts[(i + 1) % n]) <= EDGE_TOL:
                raise GeometryError(f"region {self.id}: repeated vertex {verts[i]}")
        if _signed_area(verts) <= 0:
            raise GeometryError(
                f"region {self.id}: polygon must be counter-clockwise with nonempty interior")
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            cx, cy = verts[(i + 2) % n]
            cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            if cross < -1e-12:
                raise GeometryError(f"region {self.id}: polygon is not convex at {verts[(i + 1) % n]}")
        normals = []
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            length = math.hypot(bx - ax, by - ay)
            nx, ny = (by - ay) / length, -(bx - ax) / length
            normals.append((nx, ny, nx * ax + ny * ay))
        object.__setattr__(self, "_halfplanes", tuple(normals))

    @property
    def u_max(self) -> float:
        return self.v / self.r

    @property
    def halfplanes(self) -> tuple[tuple[float, float, float], ...]:
        """Outward unit normals and offsets ``(nx, ny, b)``; inside means ``n.p <= b``."""
        return self._halfplanes  # type: ignore[attr-defined]

    def edges(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    def signed_distance(self, x: float, y: float) -> float:
        """Max over edges of ``n.p - b``: negative inside, zero on the boundary."""
        return max(nx * x + ny * y - b for nx, ny, b in self.halfplanes)

    def contains(self, x: float, y: float, tol: float = EDGE_TOL) -> bool:
        return self.signed_distance(x, y) <= tol

    def contains_interior(self, x: float, y: float, tol: float = EDGE_TOL) -> bool:
        return self.signed_distance(x, y) < -tol


@dataclass(frozen=True)
class SharedEdge:
    """Boundary segment shared by two regions, oriented along ``a -> b``."""

    p: int
    q: int
    a: tuple[float, float]
    b: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.a, self.b)

    def point_at(self, s: float) -> tuple[float, float]:
        t = s / self.length
        return (self.a[0] + t * (self.b[0] - self.a[0]), self.a[1] + t * (self.b[1] - self.a[1]))

    def other(self, region_id: int) -> int:
        return self.q if region_id == self.p else self.p


@dataclass(frozen=True)
class Boundary:
    """Result of :func:`locate` for a point on the edge shared by two regions."""

    p: int
    q: int


class Outside:
    """Result of :func:`locate` for a point in no region."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Outside"


OUTSIDE = Outside()


def _collinear_overlap(e1, e2, tol):
    (ax, ay), (bx, by) = e1
    (cx, cy), (dx, dy) = e2
    ux, uy = bx - ax, by - ay
    length = math.hypot(ux, uy)
    ux, uy = ux / length, uy / length
    # both endpoints of e2 on the supporting line of e1
    for px, py in ((cx, cy), (dx, dy)):
        if abs((px - ax) * uy - (py - ay) * ux) > tol:
            return None
    s_c = (cx - ax) * ux + (cy - ay) * uy
    s_d = (dx - ax) * ux + (dy - ay) * uy
    lo = max(0.0, min(s_c, s_d))
    hi = min(length, max(s_c, s_d))
    if hi - lo <= tol:
        return None
    return ((ax + lo * ux, ay + lo * uy), (ax + hi * ux, ay + hi * uy))


def _interiors_overlap(r1: Region, r2: Region, tol: float = 1e-9) -> bool:
    # separating axis test over edge normals of both convex polygons
    for reg, other in ((r1, r2), (r2, r1)):
        for nx, ny, b in reg.halfplanes:
            lo = min(nx * x + ny * y for x, y in other.vertices)
            if lo >= b - tol:
                return False
    return True


@dataclass(frozen=True)
class RegionMap:
    regions: tuple[Region, ...]
    shared_edges: tuple[SharedEdge, ...] = field(init=False)

    def __post_init__(self):
        regs = tuple(self.regions)
        object.__setattr__(self, "regions", regs)
        ids = [r.id for r in regs]
        if len(set(ids)) != len(ids):
            raise GeometryError(f"duplicate region ids in {ids}")
        if not regs:
            raise GeometryError("region map is empty")
        shared = []
        for i, ri in enumerate(regs):
            for rj in regs[i + 1:]:
                if _interiors_overlap(ri, rj):
                    raise GeometryError(f"regions {ri.id} and {rj.id} have overlapping interiors")
                for e1 in ri.edges():
                    for e2 in rj.edges():
                        seg = _collinear_overlap(e1, e2, 1e-9)
                        if seg is not None:
                            shared.append(SharedEdge(ri.id, rj.id, seg[0], seg[1]))
        object.__setattr__(self, "shared_edges", tuple(shared))
        object.__setattr__(self, "_by_id", {r.id: r for r in regs})
        # connectivity of the union through shared edges
        seen = {regs[0].id}
        stack = [regs[0].id]
        while stack:
            cur = stack.pop()
            for nb in self.neighbors(cur):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(regs):
            raise GeometryError(f"region union is not connected (reached {sorted(seen)})")

    def region(self, region_id: int) -> Region:
        try:
            return self._by_id[region_id]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown region id {region_id}") from None

    @property
    def ids(self) -> list[int]:
        return [r.id for r in self.regions]

    def neighbors(self, region_id: int) -> list[int]:
        out = []
        for e in self.shared_edges:
            if e.p == region_id and e.q not in out:
                out.append(e.q)
            elif e.q == region_id and e.p not in out:
                out.append(e.p)
        return sorted(out)

    def shared_edge(self, p: int, q: int) -> SharedEdge:
        for e in self.shared_edges:
            if {e.p, e.q} == {p, q}:
                return e
        raise KeyError(f"regions {p} and {q} are not adjacent")

    def edge_normal(self, p: int, q: int) -> tuple[float, float]:
        """Unit normal of the shared edge pointing from region ``p`` into ``q``."""
        e = self.shared_edge(p, q)
        dx, dy = e.b[0] - e.a[0], e.b[1] - e.a[1]
        length = math.hypot(dx, dy)
        nx, ny = dy / length, -dx / length
        # orient by the centroid of p
        cx, cy = _centroid(self.region(p).vertices)
        mx, my = e.point_at(0.5 * e.length)
        if nx * (cx - mx) + ny * (cy - my) > 0:
            nx, ny = -nx, -ny
        return nx, ny

    def locate(self, x: float, y: float, tol: float = EDGE_TOL):
        return locate((x, y), self, tol)

    def mirrored(self) -> "RegionMap":
        """Reflection of the whole map across the y-axis."""
        regs = []
        for r in self.regions:
            verts = tuple((-x, y) for x, y in reversed(r.vertices))
            regs.append(Region(r.id, verts, r.v, r.r))
        return RegionMap(tuple(regs))


def _centroid(vertices):
    n = len(vertices)
    return (sum(v[0] for v in vertices) / n, sum(v[1] for v in vertices) / n)


def locate(point: tuple[float, float], region_map: RegionMap, tol: float = EDGE_TOL):
    """Region id containing ``point``, a :class:`Boundary` pair, or :data:`OUTSIDE`."""
    x, y = point
    hits = [r.id for r in region_map.regions if r.contains(x, y, tol)]
    if not hits:
        return OUTSIDE
    if len(hits) == 1:
        return hits[0]
    return Boundary(hits[0], hits[1])


# --------------------------------------------------------------------------- frames


@dataclass(frozen=True)
class BoundaryFrame:
    """Crossing-local frame.

    ``phi`` is the tangent angle measured clockwise from +x, which is also the
    heading of the boundary normal; after the transform the boundary is the
    line ``y' = 0`` and ``theta'`` is the angle to the normal.
    """

    anchor: tuple[float, float]
    phi: float

    @classmethod
    def from_normal(cls, anchor: tuple[float, float], nx: float, ny: float) -> "BoundaryFrame":
        return cls((float(anchor[0]), float(anchor[1])), heading_of(nx, ny))


def to_boundary_frame(c: Configuration, f: BoundaryFrame) -> Configuration:
    cp, sp = math.cos(f.phi), math.sin(f.phi)
    dx, dy = c.x - f.anchor[0], c.y - f.anchor[1]
    return Configuration(cp * dx - sp * dy, sp * dx + cp * dy, c.theta - f.phi)


def from_boundary_frame(c: Configuration, f: BoundaryFrame) -> Configuration:
    cp, sp = math.cos(f.phi), math.sin(f.phi)
    return Configuration(cp * c.x + sp * c.y + f.anchor[0],
                         -sp * c.x + cp * c.y + f.anchor[1], c.theta + f.phi)
