"""Minimum-time Dubins paths through regions with different speeds and turning radii."""

__version__ = "0.1.0"

from .dubins import solve_dubins
from .geometry import Configuration, Kind, Region, RegionMap
from .planner import Scenario, plan, plan_multi_region, plan_two_region
from .adjoint import verify

__all__ = [
    "__version__", "Configuration", "Kind", "Region", "RegionMap", "Scenario",
    "plan", "plan_multi_region", "plan_two_region", "solve_dubins", "verify",
]
