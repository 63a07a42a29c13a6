import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROPERTY, big_plane, corpus_scenario, load_corpus
from hetdubins.dubins import solve_dubins
from hetdubins.geometry import Configuration
from hetdubins.oracle import (
    ControlSchedule,
    LeftDomain,
    NoFeasibleFound,
    brute_force_min_time,
    sign_sequences,
    simulate,
)
from hetdubins.planner import Scenario
from hetdubins.scenarios import random_single_region, two_region_map


def test_straight_schedule_in_one_region():
    m = big_plane(v=2.0)
    tr = simulate(Configuration(0, 0, 0.3), ControlSchedule(((0, 4.0),)), m)
    assert tr.end.distance_to(Configuration(0, 0, 0)) == pytest.approx(8.0, abs=1e-12)
    assert tr.events == ()
    assert tr.duration == pytest.approx(4.0)


def test_crossing_event_on_straight_piece():
    m = two_region_map(1.0, 1.0, 2.0, 1.0)
    tr = simulate(Configuration(0.5, 3.0, math.pi - 0.2), ControlSchedule(((0, 6.0),)), m, 1)
    assert len(tr.events) == 1
    ev = tr.events[0]
    assert abs(ev.y) <= 1e-10
    assert (ev.p, ev.q) == (1, 2)
    assert ev.t == pytest.approx(3.0 / math.cos(0.2), abs=1e-10)
    assert tr.end_region == 2
    # after the crossing the speed doubles
    assert tr.end.distance_to(Configuration(ev.x, ev.y, 0)) == pytest.approx(2 * (6.0 - ev.t))


def test_turn_rate_switches_with_region():
    m = two_region_map(1.0, 1.0, 1.0, 0.5)
    tr = simulate(Configuration(0, 0.5, math.pi), ControlSchedule(((1, 1.2),)), m, 1)
    assert len(tr.events) == 1
    ev = tr.events[0]
    assert ev.t == pytest.approx(math.pi / 6, abs=1e-10)
    # heading rate is 1 before the crossing and 2 after it
    assert tr.end.theta == pytest.approx(
        math.remainder(ev.theta + 2.0 * (1.2 - ev.t), 2 * math.pi), abs=1e-9)


def test_leaving_the_domain():
    with pytest.raises(LeftDomain):
        simulate(Configuration(0, 0, 0), ControlSchedule(((0, 50.0),)), two_region_map(1, 1, 1, 1), 1)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ControlSchedule(((1, 1.0), (1, 2.0)))
    with pytest.raises(ValueError):
        ControlSchedule(((0, -1.0),))
    with pytest.raises(ValueError):
        ControlSchedule(((2, 1.0),))


def test_sign_sequences_count():
    seqs = sign_sequences(3)
    assert len(seqs) == 3 + 6 + 12
    assert all(a != b for s in seqs for a, b in zip(s, s[1:]))


@PROPERTY
@given(st.lists(st.tuples(st.sampled_from([-1, 0, 1]), st.floats(0, 3)), min_size=1, max_size=4),
       st.lists(st.tuples(st.sampled_from([-1, 0, 1]), st.floats(0, 3)), min_size=1, max_size=4),
       st.floats(-math.pi, math.pi))
def test_simulate_additive(a, b, th):
    def sched(entries):
        out = []
        for s, d in entries:
            if out and out[-1][0] == s:
                out[-1] = (s, out[-1][1] + d)
            else:
                out.append((s, d))
        return ControlSchedule(tuple(out))

    m = two_region_map(1.0, 1.0, 1.7, 0.6)
    start = Configuration(0.3, 1.0, th)
    sa, sb = sched(a), sched(b)
    try:
        whole = simulate(start, sa + sb, m, 1)
        first = simulate(start, sa, m, 1)
        second = simulate(first.end, sb, m, first.end_region)
    except LeftDomain:
        return
    assert whole.end.distance_to(second.end) <= 1e-9
    assert abs(math.remainder(whole.end.theta - second.end.theta, 2 * math.pi)) <= 1e-9
    assert whole.duration == pytest.approx(first.duration + second.duration, abs=1e-12)
    assert len(whole.events) == len(first.events) + len(second.events)


def test_simulate_deterministic():
    m = two_region_map(1.0, 1.0, 1.7, 0.6)
    sched = ControlSchedule(((1, 1.0), (0, 3.0), (-1, 2.0)))
    a = simulate(Configuration(0.3, 1.0, 2.5), sched, m, 1)
    b = simulate(Configuration(0.3, 1.0, 2.5), sched, m, 1)
    assert a == b


def test_replay_planned_path(fig3_paths):
    s, p = fig3_paths[("a", 1.0)]
    tr = simulate(s.start, ControlSchedule.from_path(p), s.map, s.start_region)
    assert tr.end.distance_to(s.goal) <= 1e-6
    assert abs(math.remainder(tr.end.theta - s.goal.theta, 2 * math.pi)) <= 1e-6
    assert tr.duration == pytest.approx(p.total_time, abs=1e-12)
    assert len(tr.events) == 1


def test_replay_all_reference_paths(fig3_paths):
    for key, (s, p) in fig3_paths.items():
        tr = simulate(s.start, ControlSchedule.from_path(p), s.map, s.start_region)
        assert tr.end.distance_to(s.goal) <= 1e-6, key
        assert tr.duration == pytest.approx(p.total_time, abs=1e-12)


def test_goal_dead_ahead_with_one_piece():
    m = big_plane(v=2.0)
    s = Scenario(m, Configuration(1, 1, 0.5), Configuration(1 + 6 * math.sin(0.5), 1 + 6 * math.cos(0.5), 0.5),
                 0, 0)
    res = brute_force_min_time(s, K=1)
    assert res.schedule.signs == (0,)
    assert res.time == pytest.approx(3.0, rel=1e-9)


def test_nothing_found_with_too_few_pieces():
    s = Scenario(big_plane(), Configuration(0, 0, 0), Configuration(3, 3, 2.0), 0, 0)
    with pytest.raises(NoFeasibleFound):
        brute_force_min_time(s, K=1)


def test_monotone_in_piece_budget():
    # a quarter turn followed by a straight run is reachable with two pieces
    s = Scenario(big_plane(), Configuration(0, 0, 0), Configuration(3, 1, math.pi / 2), 0, 0)
    times = [brute_force_min_time(s, K=k, starts=16).time for k in (2, 3, 4)]
    assert times[0] == pytest.approx(math.pi / 2 + 2, rel=1e-6)
    assert times[1] <= times[0] + 1e-6
    assert times[2] <= times[1] + 1e-6


def test_deterministic_result():
    s = Scenario(big_plane(), Configuration(0, 0, 0), Configuration(2, -1, 2.0), 0, 0)
    a = brute_force_min_time(s, K=3, starts=8)
    b = brute_force_min_time(s, K=3, starts=8)
    assert a.time == b.time and a.schedule == b.schedule


def test_live_agreement_with_dubins():
    rng = np.random.default_rng(99)
    for _ in range(3):
        s, r = random_single_region(rng)
        t = brute_force_min_time(s, K=3).time
        d = solve_dubins(s.start, s.goal, r).total_time
        assert abs(t - d) / d <= 1e-3


@pytest.mark.parametrize("name", ["oracle_single_region.json", "oracle_two_region.json"])
def test_frozen_schedules_replay(name):
    data = load_corpus(name)
    for e in data["entries"]:
        s = corpus_scenario(e)
        sched = ControlSchedule(tuple(tuple(x) for x in e["schedule"]))
        tr = simulate(s.start, sched, s.map, s.start_region)
        assert tr.end.distance_to(s.goal) <= 1e-4, e["index"]
        assert abs(math.remainder(tr.end.theta - s.goal.theta, 2 * math.pi)) <= 1e-4
        assert tr.duration == pytest.approx(e["time"], rel=1e-9)
        assert tr.end_region == s.goal_region
        assert len(tr.events) == e["crossings"]


def test_two_region_oracle_not_beaten_by_planner(two_region_corpus):
    for entry, _, p in two_region_corpus:
        assert entry["time"] >= p.total_time * (1 - 0.03), entry["index"]
