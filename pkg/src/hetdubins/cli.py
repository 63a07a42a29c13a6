"""Command line interface: ``hetdubins {plan,sweep,verify,oracle}``.

Exit codes: 0 success, 1 usage or parse error, 2 verification failure (or no
feasible schedule for ``oracle``).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .adjoint import DEFAULT_TOL, verify
from .oracle import NoFeasibleFound, brute_force_min_time
from .path import PathSolution
from .planner import NoFeasiblePath, Scenario, SequenceBudgetExceeded, plan
from .scenario_file import (
    ScenarioDocument, ScenarioFileError, load_scenario, path_from_csv, path_to_csv,
    scenario_from_dict, set_parameter,
)
from .svg import render_svg

log = logging.getLogger("hetdubins")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

#: Piece budget for ``--oracle-check`` and the ``oracle`` verb unless overridden.
CLI_ORACLE_K = 5


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(x: float):
    return float(x) if math.isfinite(x) else None


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


def _max_crossings(args, doc: ScenarioDocument) -> Optional[int]:
    if args.max_crossings is not None:
        if args.max_crossings < 0:
            raise UsageError("--max-crossings must be >= 0")
        return args.max_crossings
    return doc.options.get("max_crossings")


def _tol(args, doc: ScenarioDocument) -> float:
    tol = args.tol if args.tol is not None else doc.options.get("tol", DEFAULT_TOL)
    if not (isinstance(tol, (int, float)) and tol > 0):
        raise UsageError(f"tolerance must be positive, got {tol!r}")
    return float(tol)


def path_summary(path: PathSolution) -> dict:
    crossings = []
    for rec in path.crossings:
        item = {"junction": rec.junction, "from": rec.p, "to": rec.pp, "kind": rec.kind.value,
                "theta_star_rad": rec.theta_star,
                "point": list(rec.frame.anchor)}
        if rec.is_lcl:
            item["theta_p_rad"] = rec.theta_p
            item["theta_pp_rad"] = rec.theta_pp
        crossings.append(item)
    return {"time": path.total_time, "route": path.route, "family": path.family,
            "crossings": crossings,
            "phases": [{"region": ph.region,
                        "segments": [{"kind": s.kind.value, "duration": s.duration}
                                     for s in ph.segments]} for ph in path.phases]}


def _report(args, doc, path, rep, extra=None) -> dict:
    out = {"format": 1, "tool": f"hetdubins {__version__}", "path": path_summary(path),
           "verification": rep.to_dict()}
    if not args.no_timestamp:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if extra:
        out.update(extra)
    return out


def _oracle_block(scenario: Scenario, K: int, planner_time: Optional[float] = None) -> dict:
    try:
        res = brute_force_min_time(scenario, K=K)
    except NoFeasibleFound as exc:
        return {"K": K, "time": None, "error": str(exc)}
    block = {"K": K, "time": res.time, "schedule": [list(e) for e in res.schedule.entries],
             "endpoint_error": res.endpoint_error, "crossings": res.crossings}
    if planner_time is not None:
        block["gap_rel"] = (planner_time - res.time) / res.time
    return block


# --------------------------------------------------------------------------- verbs


def run_plan(args) -> int:
    doc = load_scenario(args.scenario)
    tol = _tol(args, doc)
    path = plan(doc.scenario, _max_crossings(args, doc))
    rep = verify(path, doc.scenario, tol=tol)
    extra = {}
    if args.oracle_check:
        extra["oracle"] = _oracle_block(doc.scenario, args.oracle_k, path.total_time)
    out = Path(args.out)
    _write(out, "trajectory.csv", path_to_csv(path))
    _write(out, "path.svg", render_svg(doc.scenario, path))
    _write(out, "report.json", _dump(_report(args, doc, path, rep, extra)))
    status = "PASS" if rep.passed else "FAIL"
    print(f"T = {path.total_time:.6f}  route {path.route}  family {path.family}  verification {status}")
    if not rep.passed:
        for e in rep.entries:
            if not e.passed:
                print(f"failed: {e.id} residual {e.residual:.3e} > tol {e.tol:.1e} {e.note}",
                      file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(float(tok))
        except ValueError:
            raise UsageError(f"--values: {tok!r} is not a number") from None
    return vals


def run_sweep(args) -> int:
    doc = load_scenario(args.scenario)
    spec = doc.sweep or {}
    param = args.param or spec.get("parameter")
    if args.values is not None:
        values = _parse_values(args.values)
    else:
        values = spec.get("values", [])
    if not param:
        raise UsageError("sweep needs a parameter (--param or the scenario's sweep.parameter)")
    if not isinstance(values, list) or not values:
        raise UsageError("sweep needs a nonempty value list (--values or sweep.values)")
    tol = _tol(args, doc)
    mc = _max_crossings(args, doc)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("value", "T", "route"))
    failed = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise UsageError(f"sweep value {v!r} is not a number")
        sub = scenario_from_dict(set_parameter(doc.raw, param, v))
        path = plan(sub.scenario, mc)
        rep = verify(path, sub.scenario, tol=tol)
        if not rep.passed:
            failed.append(v)
        w.writerow((repr(float(v)), repr(path.total_time), path.route))
        print(f"{param} = {v}: T = {path.total_time:.6f} route {path.route}")
    _write(Path(args.out), "sweep.csv", buf.getvalue())
    if failed:
        print(f"verification failed for values {failed}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def run_verify(args) -> int:
    doc = load_scenario(args.scenario)
    tol = _tol(args, doc)
    p = Path(args.path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{p}: cannot read trajectory file ({exc.strerror})") from None
    try:
        path = path_from_csv(text, doc.scenario.map)
    except ScenarioFileError as exc:
        raise ScenarioFileError(f"{p}: {exc}") from None
    rep = verify(path, doc.scenario, tol=tol)
    _write(Path(args.out), "report.json", _dump(_report(args, doc, path, rep)))
    print(f"verification {'PASS' if rep.passed else 'FAIL'}")
    for e in rep.entries:
        if not e.passed:
            print(f"failed: {e.id} residual {e.residual:.3e} > tol {e.tol:.1e} {e.note}",
                  file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def run_oracle(args) -> int:
    doc = load_scenario(args.scenario)
    if args.oracle_k < 1:
        raise UsageError("--oracle-k must be >= 1")
    block = _oracle_block(doc.scenario, args.oracle_k)
    out = {"format": 1, "tool": f"hetdubins {__version__}", "oracle": block}
    if not args.no_timestamp:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    _write(Path(args.out), "oracle.json", _dump(out))
    if block["time"] is None:
        print(block["error"], file=sys.stderr)
        return EXIT_FAIL
    print(f"oracle T = {block['time']:.6f} with {len(block['schedule'])} pieces")
    return EXIT_OK


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetdubins",
                                 description="Minimum-time Dubins paths across regions of "
                                             "different speed and turning radius.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, out_default="out"):
        p.add_argument("--scenario", required=True, metavar="PATH", help="scenario JSON file")
        p.add_argument("--out", default=out_default, metavar="DIR", help="output directory")
        p.add_argument("--tol", type=float, default=None, metavar="X",
                       help=f"verification tolerance (default {DEFAULT_TOL:g})")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the timestamp so outputs are byte-identical across runs")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = sub.add_parser("plan", help="plan, verify and write trajectory.csv, path.svg, report.json")
    common(p)
    p.add_argument("--max-crossings", type=int, default=None, metavar="N")
    p.add_argument("--oracle-check", action="store_true",
                   help="also run the brute-force oracle and report the time gap")
    p.add_argument("--oracle-k", type=int, default=CLI_ORACLE_K, metavar="K",
                   help=f"oracle piece budget (default {CLI_ORACLE_K})")
    p.set_defaults(func=run_plan)

    p = sub.add_parser("sweep", help="plan over a list of parameter values and write sweep.csv")
    common(p)
    p.add_argument("--max-crossings", type=int, default=None, metavar="N")
    p.add_argument("--param", default=None, help="parameter path, e.g. regions[1].v")
    p.add_argument("--values", default=None, help="comma-separated values")
    p.set_defaults(func=run_sweep)

    p = sub.add_parser("verify", help="verify a trajectory CSV against the scenario")
    common(p)
    p.add_argument("--path", required=True, metavar="CSV", help="trajectory table to check")
    p.set_defaults(func=run_verify)

    p = sub.add_parser("oracle", help="run the brute-force oracle and write oracle.json")
    common(p)
    p.add_argument("--oracle-k", type=int, default=CLI_ORACLE_K, metavar="K",
                   help=f"piece budget (default {CLI_ORACLE_K})")
    p.set_defaults(func=run_oracle)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; we reserve 2 for failures
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioFileError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoFeasiblePath, SequenceBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
