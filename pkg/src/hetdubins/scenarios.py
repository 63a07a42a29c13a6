"""Builders for the reference scenarios and for seeded random scenarios."""

from __future__ import annotations

import math

import numpy as np

from .geometry import Configuration, Region, RegionMap
from .planner import Scenario

#: Half-width of the square workspace used by the reference layouts.
HALF_WIDTH = 20.0

#: Two-region test cases: (label, r1 / v1, r2 / v1 or None for r2 = 1).
FIG3_CASES = {"a": (1.0, None), "b": (0.5, None), "c": (1.5, None), "d": (0.5, 1.5)}
FIG3_SPEEDS = (0.25, 0.5, 1.0, 2.0, 4.0)


def two_region_map(v1: float, r1: float, v2: float, r2: float, half: float = HALF_WIDTH) -> RegionMap:
    """Region 1 is the upper half of the square, region 2 the lower half; they share y = 0."""
    R1 = Region(1, ((-half, 0.0), (half, 0.0), (half, half), (-half, half)), v1, r1)
    R2 = Region(2, ((-half, -half), (half, -half), (half, 0.0), (-half, 0.0)), v2, r2)
    return RegionMap((R1, R2))


def fig3(case: str, v1: float) -> Scenario:
    """Two half-planes; start ((-3, 4.5), pi/4) above the boundary, goal ((1, -4), 5 pi/4) below."""
    f1, f2 = FIG3_CASES[case]
    r2 = 1.0 if f2 is None else f2 * v1
    return Scenario(two_region_map(v1, f1 * v1, 1.0, r2),
                    Configuration(-3.0, 4.5, math.pi / 4), Configuration(1.0, -4.0, 5 * math.pi / 4),
                    1, 2)


def three_region_map(v1, r1, v2, r2, v3, r3, half: float = HALF_WIDTH) -> RegionMap:
    """Regions 1 (upper left) and 3 (lower left) share y = 0; region 2 is the right half."""
    R1 = Region(1, ((-half, 0.0), (0.0, 0.0), (0.0, half), (-half, half)), v1, r1)
    R2 = Region(2, ((0.0, -half), (half, -half), (half, half), (0.0, half)), v2, r2)
    R3 = Region(3, ((-half, -half), (0.0, -half), (0.0, 0.0), (-half, 0.0)), v3, r3)
    return RegionMap((R1, R2, R3))


def fig6(v2: float, v1: float = 0.25, r1: float = 0.5, r2: float = 0.5, v3: float = 0.25,
         r3: float = 0.5) -> Scenario:
    """Start (-1, 2) and goal (-1, -2), both heading down, on either side of y = 0 left of x = 0."""
    return Scenario(three_region_map(v1, r1, v2, r2, v3, r3),
                    Configuration(-1.0, 2.0, math.pi), Configuration(-1.0, -2.0, math.pi), 1, 3)


FIG6_SPEEDS = (0.475, 0.48, 0.75, 1.5, 5.0)


def fig5b() -> Scenario:
    """Three-region layout where the straight perpendicular crossing is optimal."""
    return Scenario(three_region_map(2.0, 1.0, 0.5, 0.8, 1.0, 0.5),
                    Configuration(-1.0, 2.0, math.pi), Configuration(-1.0, -2.0, math.pi), 1, 3)


def random_two_region(rng: np.random.Generator, homogeneous: bool = False) -> Scenario:
    """Start above and goal below the shared edge y = 0, away from the outer walls.

    Start and goal keep at least one turning diameter from the shared edge, so
    both turning circles fit inside their own region and a single crossing
    always suffices.
    """
    v1, v2 = rng.uniform(0.5, 2.0, 2)
    r1, r2 = rng.uniform(0.5, 2.0, 2)
    if homogeneous:
        v2, r2 = v1, r1
    start = Configuration(rng.uniform(-5, 5), 2 * r1 + rng.uniform(0.1, 5),
                          rng.uniform(-math.pi, math.pi))
    goal = Configuration(rng.uniform(-5, 5), -2 * r2 - rng.uniform(0.1, 5),
                         rng.uniform(-math.pi, math.pi))
    return Scenario(two_region_map(float(v1), float(r1), float(v2), float(r2)), start, goal, 1, 2)


def random_single_region(rng: np.random.Generator, half: float = 1000.0) -> tuple[Scenario, float]:
    """A pose pair inside a very large square of unit speed; returns the scenario and ``r``.

    The start-goal distance is uniform in ``[0.5 r, 10 r]``.
    """
    r = float(rng.uniform(0.5, 2.0))
    reg = Region(0, ((-half, -half), (half, -half), (half, half), (-half, half)), 1.0, r)
    start = Configuration(0.0, 0.0, rng.uniform(-math.pi, math.pi))
    dist = r * rng.uniform(0.5, 10.0)
    ang = rng.uniform(-math.pi, math.pi)
    goal = Configuration(dist * math.sin(ang), dist * math.cos(ang), rng.uniform(-math.pi, math.pi))
    return Scenario(RegionMap((reg,)), start, goal, 0, 0), r


def reference_documents() -> dict[str, dict]:
    """Scenario documents for every reference layout, keyed by file stem."""
    from .scenario_file import scenario_to_dict

    docs = {}
    for case in FIG3_CASES:
        for v1 in FIG3_SPEEDS:
            docs[f"fig3{case}_v{v1:g}"] = scenario_to_dict(fig3(case, v1), {"max_crossings": 1})
    sweep = {"parameter": "regions[1].v",
             "values": [0.46, 0.47, 0.475, 0.48, 0.49, 0.75, 1.5, 5.0]}
    docs["fig6_sweep"] = scenario_to_dict(fig6(0.75), {"max_crossings": 2}, sweep)
    docs["fig5b"] = scenario_to_dict(fig5b(), {"max_crossings": 2})
    return docs
