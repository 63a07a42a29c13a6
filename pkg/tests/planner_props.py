"""Planner invariants shared by the unit tests and the acceptance suite.

Each check takes a seed, builds a random two-region scenario from it, plans
the scenario and a transformed copy, and returns the relative discrepancy
between the planned times and the value the invariant predicts.  Plans and
results are cached, so a second run over the same examples is free.
"""

from functools import lru_cache

import numpy as np

from hetdubins.geometry import Region, RegionMap
from hetdubins.planner import Scenario, plan_two_region
from hetdubins.scenarios import random_two_region

REL_TOL = 1e-6


def scenario(seed: int) -> Scenario:
    return random_two_region(np.random.default_rng([2024, seed]))


@lru_cache(maxsize=None)
def base_time(seed: int) -> float:
    return plan_two_region(scenario(seed)).total_time


def faster_region(s: Scenario, q: int, k: float) -> Scenario:
    regs = tuple(Region(r.id, r.vertices, r.v * k if r.id == q else r.v, r.r)
                 for r in s.map.regions)
    return Scenario(RegionMap(regs), s.start, s.goal, s.start_region, s.goal_region)


@lru_cache(maxsize=None)
def scaling_error(seed: int, k: float) -> float:
    t = base_time(seed)
    return abs(plan_two_region(scenario(seed).scaled(k)).total_time - k * t) / (k * t)


@lru_cache(maxsize=None)
def speed_error(seed: int, k: float) -> float:
    t = base_time(seed)
    return abs(plan_two_region(scenario(seed).with_speeds_scaled(k)).total_time - t / k) / (t / k)


@lru_cache(maxsize=None)
def mirror_error(seed: int) -> float:
    t = base_time(seed)
    return abs(plan_two_region(scenario(seed).mirrored()).total_time - t) / t


@lru_cache(maxsize=None)
def monotone_excess(seed: int, q: int, k: float) -> float:
    """How much faster travel in region ``q`` increased the time (0 if it did not)."""
    t = base_time(seed)
    return max(0.0, (plan_two_region(faster_region(scenario(seed), q, k)).total_time - t) / t)
