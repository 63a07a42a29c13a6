import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import planner_props as props
from conftest import PROPERTY, square
from hetdubins.adjoint import verify
from hetdubins.dubins import solve_dubins
from hetdubins.geometry import Boundary, Configuration, Kind, RegionMap, locate, propagate
from hetdubins.path import PathSolution, Phase, Segment, continuity_gap, path_time
from hetdubins.planner import (
    NoFeasiblePath,
    Scenario,
    ScenarioError,
    SequenceBudgetExceeded,
    crossing_parameters,
    enumerate_walks,
    path_with_crossings,
    plan_multi_region,
    plan_two_region,
)
from hetdubins.refraction import CrossingKind
from hetdubins.scenarios import FIG3_SPEEDS, fig5b, random_two_region, two_region_map

FIG3A = dict(zip(FIG3_SPEEDS, (25.32, 15.79, 10.68, 8.02, 7.29)))
FIG3B = dict(zip(FIG3_SPEEDS, (24.64, 15.21, 10.17, 7.44, 6.05)))
FIG6 = {0.475: 16.00, 0.48: 15.96, 0.75: 14.19, 1.5: 12.37, 5.0: 10.95}

seeds = st.integers(0, 10**6)


def rel(a, b):
    return abs(a - b) / abs(b)


def lies_along_boundary(path, region_map):
    """True if the interior of a nonzero segment runs along a shared edge."""
    for _, ph, seg, c, _ in path.iter_segments():
        if seg.duration <= 1e-7:
            continue
        pts = [propagate(c, seg.kind, f * seg.duration, ph.v, ph.u_max) for f in (0.25, 0.5, 0.75)]
        if all(isinstance(locate(q.point, region_map), Boundary) for q in pts):
            return True
    return False


# --------------------------------------------------------------------------- reference scenarios


@pytest.mark.parametrize("v1", FIG3_SPEEDS)
def test_fig3a_times(fig3_paths, v1):
    assert rel(fig3_paths[("a", v1)][1].total_time, FIG3A[v1]) <= 0.02


@pytest.mark.parametrize("v1", FIG3_SPEEDS)
def test_fig3b_times(fig3_paths, v1):
    assert rel(fig3_paths[("b", v1)][1].total_time, FIG3B[v1]) <= 0.02


def test_fig3a_homogeneous_time_is_dubins(fig3_paths):
    s, p = fig3_paths[("a", 1.0)]
    d = solve_dubins(s.start, s.goal, 1.0)
    assert rel(p.total_time, d.total_time) <= 1e-6
    assert rel(path_time(p), 10.68) <= 0.02


@pytest.mark.parametrize("case", ["a", "b", "c", "d"])
def test_reference_paths_are_clean(fig3_paths, case):
    for v1 in FIG3_SPEEDS:
        s, p = fig3_paths[(case, v1)]
        assert p.route == "1-2"
        assert continuity_gap(p) <= 1e-9
        assert math.hypot(p.end.x - s.goal.x, p.end.y - s.goal.y) <= 1e-9
        assert not lies_along_boundary(p, s.map)
        assert verify(p, s).passed, (case, v1)


def test_fig5b_goes_straight_across():
    s = fig5b()
    p = plan_multi_region(s, 2)
    assert p.route == "1-3"
    assert p.family == "L|L"
    assert p.crossings[0].kind is CrossingKind.L_PERP
    assert p.total_time == pytest.approx(2 / 2.0 + 2 / 1.0, rel=1e-9)


@pytest.mark.parametrize("v2", sorted(FIG6))
def test_fig6_times(fig6_sweep, v2):
    assert rel(fig6_sweep[v2][1].total_time, FIG6[v2]) <= 0.02


def test_fig6_route_changes_near_transition(fig6_sweep):
    routes = {v2: p.route for v2, (_, p) in fig6_sweep.items()}
    assert routes[0.46] == routes[0.47] == "1-3"
    assert routes[0.49] == routes[0.75] == "1-2-3"


def test_single_region_call_equals_dubins():
    m = RegionMap((square(0, -50, -50, 50, 50, 2.0, 1.5),))
    s = Scenario(m, Configuration(0, 0, 0.3), Configuration(4, -3, 2.0), 0, 0)
    p = plan_multi_region(s, 0)
    d = solve_dubins(s.start, s.goal, 1.5, v=2.0)
    assert p.total_time == pytest.approx(d.total_time, rel=1e-12)
    assert p.family == d.family


def test_homogeneous_two_region_matches_merged_plane():
    rng = np.random.default_rng(8)
    for _ in range(5):
        s = random_two_region(rng, homogeneous=True)
        reg = s.map.region(1)
        p = plan_two_region(s)
        d = solve_dubins(s.start, s.goal, reg.r, v=reg.v)
        assert rel(p.total_time, d.total_time) <= 1e-6


def test_planner_matches_frozen_oracle(two_region_corpus):
    assert len(two_region_corpus) >= 20
    for entry, _, p in two_region_corpus:
        assert rel(p.total_time, entry["time"]) <= 0.03, entry["index"]


# --------------------------------------------------------------------------- errors and plumbing


def test_path_time_examples():
    assert path_time(PathSolution(())) == 0.0
    ph = Phase(0, 2.0, 1.0, Configuration(0, 0, 0), (Segment(Kind.LINE, 2.5, 0),))
    assert path_time(PathSolution((ph,))) == pytest.approx(2.5)
    assert ph.length == pytest.approx(5.0)


def test_no_feasible_path_when_regions_too_small():
    m = RegionMap((square(1, -1, 0, 1, 1, 1.0, 5.0), square(2, -1, -1, 1, 0, 1.0, 5.0)))
    s = Scenario(m, Configuration(0, 0.5, math.pi / 2), Configuration(0, -0.5, math.pi / 2), 1, 2)
    with pytest.raises(NoFeasiblePath):
        plan_two_region(s)


def test_two_region_planner_rejects_same_region():
    m = two_region_map(1, 1, 1, 1)
    with pytest.raises(ScenarioError):
        plan_two_region(Scenario(m, Configuration(0, 3, 0), Configuration(2, 5, 0), 1, 1))


def test_goal_beyond_crossing_budget():
    with pytest.raises(NoFeasiblePath):
        plan_multi_region(fig5b(), 0)


def test_sequence_cap():
    m = fig5b().map
    assert enumerate_walks(m, 1, 3, 2) == [(1, 3), (1, 2, 3)]
    with pytest.raises(SequenceBudgetExceeded):
        enumerate_walks(m, 1, 3, 6, cap=3)


def test_crossing_parameters_round_trip(fig3_paths):
    s, p = fig3_paths[("b", 2.0)]
    x = crossing_parameters(s, p)
    q = path_with_crossings(s, p.regions, x)
    assert q.total_time == pytest.approx(p.total_time, rel=1e-9)
    worse = path_with_crossings(s, p.regions, x + np.array([0.0, 0.1]))
    assert worse.total_time > p.total_time


# --------------------------------------------------------------------------- properties


@PROPERTY
@given(seeds, st.floats(0.2, 5))
def test_scaling_law(seed, k):
    assert props.scaling_error(seed, k) <= props.REL_TOL


@PROPERTY
@given(seeds, st.floats(0.2, 5))
def test_speed_law(seed, k):
    assert props.speed_error(seed, k) <= props.REL_TOL


@PROPERTY
@given(seeds)
def test_mirror_symmetry(seed):
    assert props.mirror_error(seed) <= props.REL_TOL


@PROPERTY
@given(seeds, st.sampled_from([1, 2]), st.floats(1.01, 3))
def test_faster_region_never_slower(seed, q, k):
    assert props.monotone_excess(seed, q, k) <= props.REL_TOL
