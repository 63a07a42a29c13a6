import csv
import io
import json
import math

import numpy as np
import pytest

from conftest import SCENARIOS
from hetdubins.cli import main
from hetdubins.planner import crossing_parameters, path_with_crossings
from hetdubins.scenario_file import (
    CSV_COLUMNS,
    ScenarioFileError,
    dumps_scenario,
    load_scenario,
    path_from_csv,
    path_to_csv,
    scenario_to_dict,
    set_parameter,
)
from hetdubins.scenarios import fig3

FIG3A_V1 = str(SCENARIOS / "fig3a_v1.json")


def straight_doc():
    """Single region, goal straight ahead: plans in milliseconds."""
    return {
        "format": 1,
        "regions": [{"id": 1, "vertices": [[-10, -10], [10, -10], [10, 10], [-10, 10]],
                     "v": 2.0, "r": 1.0}],
        "start": {"x": 0, "y": -5, "theta_deg": 0, "region": 1},
        "goal": {"x": 0, "y": 5, "theta_deg": 0, "region": 1},
        "options": {"max_crossings": 0},
    }


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture(scope="module")
def planned(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    code = main(["plan", "--scenario", FIG3A_V1, "--out", str(out), "--no-timestamp"])
    return code, out


# --------------------------------------------------------------------------- plan


def test_plan_writes_outputs(planned):
    code, out = planned
    assert code == 0
    for name in ("trajectory.csv", "path.svg", "report.json"):
        assert (out / name).is_file()
    rep = json.loads((out / "report.json").read_text())
    assert rep["verification"]["pass"] is True
    assert rep["path"]["route"] == "1-2"
    assert abs(rep["path"]["time"] - 10.68) / 10.68 <= 0.02
    assert "timestamp" not in rep
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    svg = (out / "path.svg").read_text()
    assert svg.startswith("<svg") and "polygon" in svg and "polyline" in svg


def test_plan_is_byte_identical(planned, tmp_path):
    _, first = planned
    assert main(["plan", "--scenario", FIG3A_V1, "--out", str(tmp_path), "--no-timestamp"]) == 0
    for name in ("trajectory.csv", "path.svg", "report.json"):
        assert (tmp_path / name).read_bytes() == (first / name).read_bytes()


def test_plan_timestamp_by_default(tmp_path):
    assert main(["plan", "--scenario", write(tmp_path, straight_doc()), "--out", str(tmp_path)]) == 0
    assert "timestamp" in json.loads((tmp_path / "report.json").read_text())


def test_plan_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["plan", "--scenario", str(missing), "--out", str(tmp_path)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_plan_overlapping_regions(tmp_path, capsys):
    doc = straight_doc()
    doc["regions"].append({"id": 2, "vertices": [[0, 0], [20, 0], [20, 20], [0, 20]],
                           "v": 1.0, "r": 1.0})
    assert main(["plan", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == 1
    assert "overlapping" in capsys.readouterr().err


def test_plan_field_precise_error(tmp_path, capsys):
    doc = straight_doc()
    doc["regions"][0]["v"] = -1
    assert main(["plan", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == 1
    assert "regions[0].v" in capsys.readouterr().err


def test_plan_json_syntax_error_names_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "format": 1,\n  "regions": [\n')
    assert main(["plan", "--scenario", str(p), "--out", str(tmp_path)]) == 1
    assert "line" in capsys.readouterr().err


def test_plan_infeasible_exits_2(tmp_path):
    doc = {
        "format": 1,
        "regions": [{"id": 1, "vertices": [[-1, 0], [1, 0], [1, 1], [-1, 1]], "v": 1, "r": 5},
                    {"id": 2, "vertices": [[-1, -1], [1, -1], [1, 0], [-1, 0]], "v": 1, "r": 5}],
        "start": {"x": 0, "y": 0.5, "theta_deg": 90},
        "goal": {"x": 0, "y": -0.5, "theta_deg": 90},
    }
    assert main(["plan", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == 2


def test_usage_errors_exit_1(tmp_path):
    assert main([]) == 1
    assert main(["plan"]) == 1
    assert main(["bogus", "--scenario", "x"]) == 1
    s = write(tmp_path, straight_doc())
    assert main(["plan", "--scenario", s, "--out", str(tmp_path), "--max-crossings", "-1"]) == 1
    assert main(["plan", "--scenario", s, "--out", str(tmp_path), "--tol", "0"]) == 1


def test_plan_with_oracle_check(tmp_path):
    s = write(tmp_path, straight_doc())
    assert main(["plan", "--scenario", s, "--out", str(tmp_path), "--oracle-check",
                 "--oracle-k", "1", "--no-timestamp"]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["oracle"]["time"] == pytest.approx(5.0, rel=1e-9)
    assert abs(rep["oracle"]["gap_rel"]) <= 1e-9


# --------------------------------------------------------------------------- sweep


def test_sweep_locates_route_change(tmp_path):
    s = str(SCENARIOS / "fig6_sweep.json")
    assert main(["sweep", "--scenario", s, "--out", str(tmp_path), "--values", "0.46,0.49"]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "sweep.csv").read_text())))
    assert [r["route"] for r in rows] == ["1-3", "1-2-3"]
    assert list(rows[0]) == ["value", "T", "route"]


def test_single_value_sweep_matches_plan(tmp_path):
    s = write(tmp_path, straight_doc())
    assert main(["sweep", "--scenario", s, "--out", str(tmp_path / "sw"), "--param",
                 "regions[0].v", "--values", "2.0"]) == 0
    assert main(["plan", "--scenario", s, "--out", str(tmp_path / "pl"), "--no-timestamp"]) == 0
    row = list(csv.DictReader(io.StringIO((tmp_path / "sw" / "sweep.csv").read_text())))[0]
    rep = json.loads((tmp_path / "pl" / "report.json").read_text())
    assert float(row["T"]) == rep["path"]["time"]
    assert row["route"] == rep["path"]["route"]


def test_sweep_empty_values(tmp_path):
    s = write(tmp_path, straight_doc())
    assert main(["sweep", "--scenario", s, "--out", str(tmp_path), "--param", "regions[0].v",
                 "--values", ""]) == 1


def test_sweep_unknown_parameter(tmp_path, capsys):
    s = write(tmp_path, straight_doc())
    assert main(["sweep", "--scenario", s, "--out", str(tmp_path), "--param", "regions[3].v",
                 "--values", "1"]) == 1
    assert "regions[3].v" in capsys.readouterr().err


# --------------------------------------------------------------------------- verify


def test_verify_own_output(planned, tmp_path):
    _, out = planned
    assert main(["verify", "--scenario", FIG3A_V1, "--path", str(out / "trajectory.csv"),
                 "--out", str(tmp_path), "--no-timestamp"]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["verification"]["pass"] is True


@pytest.mark.parametrize("case,v1,dtheta", [("a", 1.0, 0.1), ("b", 2.0, -0.1), ("c", 0.5, 0.1)])
def test_verify_perturbed_path_fails(tmp_path, fig3_paths, case, v1, dtheta):
    s, p = fig3_paths[(case, v1)]
    x = crossing_parameters(s, p)
    bad = path_with_crossings(s, p.regions, x + np.array([0.0, dtheta]))
    (tmp_path / "bad.csv").write_text(path_to_csv(bad))
    (tmp_path / "s.json").write_text(dumps_scenario(scenario_to_dict(s)))
    assert main(["verify", "--scenario", str(tmp_path / "s.json"), "--path",
                 str(tmp_path / "bad.csv"), "--out", str(tmp_path)]) == 2


def test_verify_malformed_csv(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("t,j,q,x,y\n0,0,1,0,0\n")
    assert main(["verify", "--scenario", FIG3A_V1, "--path", str(p), "--out", str(tmp_path)]) == 1
    assert "line 1" in capsys.readouterr().err
    p.write_text(",".join(CSV_COLUMNS) + "\n0,0,1,abc,0,0,0,L\n")
    assert main(["verify", "--scenario", FIG3A_V1, "--path", str(p), "--out", str(tmp_path)]) == 1


def test_verify_missing_csv(tmp_path):
    assert main(["verify", "--scenario", FIG3A_V1, "--path", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path)]) == 1


# --------------------------------------------------------------------------- oracle


def test_oracle_verb(tmp_path):
    s = write(tmp_path, straight_doc())
    assert main(["oracle", "--scenario", s, "--out", str(tmp_path), "--oracle-k", "1",
                 "--no-timestamp"]) == 0
    out = json.loads((tmp_path / "oracle.json").read_text())
    assert out["oracle"]["time"] == pytest.approx(5.0, rel=1e-9)
    assert out["oracle"]["schedule"] == [[0, pytest.approx(5.0, rel=1e-9)]]


def test_oracle_nothing_found_exits_2(tmp_path):
    doc = straight_doc()
    doc["goal"]["x"] = 3
    assert main(["oracle", "--scenario", write(tmp_path, doc), "--out", str(tmp_path),
                 "--oracle-k", "1"]) == 2


# --------------------------------------------------------------------------- file formats


def test_csv_round_trip(fig3_paths):
    for key, (s, p) in fig3_paths.items():
        q = path_from_csv(path_to_csv(p), s.map)
        assert q.total_time == pytest.approx(p.total_time, rel=1e-12), key
        assert q.family == p.family, key
        assert q.end.distance_to(p.end) <= 1e-9


def test_scenario_round_trip(tmp_path):
    s = fig3("c", 2.0)
    p = tmp_path / "s.json"
    p.write_text(dumps_scenario(scenario_to_dict(s, {"max_crossings": 1})))
    doc = load_scenario(p)
    assert doc.scenario.map == s.map
    assert doc.scenario.start.distance_to(s.start) <= 1e-12
    assert abs(math.remainder(doc.scenario.goal.theta - s.goal.theta, 2 * math.pi)) <= 1e-12
    assert doc.options == {"max_crossings": 1}


def test_set_parameter_copies():
    doc = straight_doc()
    out = set_parameter(doc, "regions[0].v", 3.0)
    assert out["regions"][0]["v"] == 3.0 and doc["regions"][0]["v"] == 2.0
    with pytest.raises(ScenarioFileError):
        set_parameter(doc, "regions[0].speed", 1.0)


def test_all_shipped_scenarios_load():
    files = sorted(SCENARIOS.glob("*.json"))
    assert len(files) >= 22
    for f in files:
        load_scenario(f)
