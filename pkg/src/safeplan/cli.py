"""Command-line runner: ``safeplan run <scenario>`` and ``safeplan validate <scenario>``.

Exit codes: 0 success, 2 configuration error, 3 planning or tracking
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import scenario as sc
from .errors import ConfigError, SafePlanError, SampleBudgetExhausted
from .planner import PlanResult, PathEntry, rrt_plan, safe_iig_plan
from .safety import barrier_value
from .tracksim import Mode, TrackingMode, TrackingReport, track_closed_loop, track_open_loop

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PLANNING = 3
EXIT_IO = 4


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_tree(path: Path, result: PlanResult) -> None:
    rows = []
    for n in result.tree.nodes:
        s = n.state
        rows.append((n.index, -1 if n.parent is None else n.parent.index, s.x, s.xdot, s.y, s.ydot,
                     n.stance.value, n.cost, n.info, int(n.closed)))
    _write_csv(path, ["index", "parent", "x", "xdot", "y", "ydot", "stance", "cost", "info", "closed"], rows)


def write_path(path: Path, entries: list[PathEntry]) -> None:
    rows = []
    for k, e in enumerate(entries):
        s = e.state
        px, py = ("", "") if e.first_input is None else (e.first_input.p_x, e.first_input.p_y)
        sn, cs = ("", "") if e.heading is None else e.heading
        rows.append((k, s.x, s.xdot, s.y, s.ydot, px, py, e.stance.value, sn, cs, e.cost, e.info))
    _write_csv(path, ["k", "x", "xdot", "y", "ydot", "p_x", "p_y", "stance", "sin_heading", "cos_heading",
                      "cost", "info"], rows)


def write_ric(path: Path, result: PlanResult) -> None:
    _write_csv(path, ["index", "ric"], enumerate(result.tree.ric_history))


def write_barrier(path: Path, result: PlanResult, obstacles) -> None:
    rows = []
    for n in result.tree.nodes:
        for j, ob in enumerate(obstacles):
            rows.append((n.index, j, barrier_value(ob, n.position)))
    _write_csv(path, ["node", "obstacle", "h"], rows)


def write_tracking(path: Path, report: TrackingReport) -> None:
    rows = []
    for k, (s, r) in enumerate(zip(report.states, report.references)):
        foot = report.placements[k - 1] if k > 0 else None
        rows.append((k, s.x, s.Ly, s.y, s.Lx, r.x, r.y, report.position_errors[k],
                     "" if foot is None else foot.p_x, "" if foot is None else foot.p_y,
                     report.placement_errors[k - 1] if k > 0 else ""))
    _write_csv(path, ["k", "x", "Ly", "y", "Lx", "ref_x", "ref_y", "position_error", "p_x", "p_y",
                      "placement_error"], rows)


def _load(args) -> tuple[sc.Scenario, list[ConfigError]]:
    overrides = dict(sc.parse_override(item) for item in args.set or [])
    if args.seed is not None:
        overrides["planner.rng_seed"] = str(args.seed)
    return sc.load(args.scenario, overrides)


def cmd_validate(args) -> int:
    try:
        _, findings = _load(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        findings = [exc]
    for f in findings:
        print(f)
    if not findings:
        print("ok")
    return EXIT_CONFIG if findings else EXIT_OK


def cmd_run(args) -> int:
    try:
        scenario, findings = _load(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if findings:
        for f in findings:
            print(f"config error: {f}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(scenario.canonical_text(), encoding="ascii")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        problem = scenario.planning_problem()
        config = scenario.planner_config()
    except (ValueError, SafePlanError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    try:
        if scenario["planner.kind"] == "rrt":
            result = rrt_plan(problem, scenario["goal.position"], config,
                              stop_at_goal=scenario["planner.stop_at_goal"])
        else:
            result = safe_iig_plan(problem, config)
    except SampleBudgetExhausted as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        result = exc.result
        status = EXIT_PLANNING
    except (SafePlanError, ValueError) as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_PLANNING

    try:
        write_tree(out / "tree.csv", result)
        write_ric(out / "ric.csv", result)
        write_barrier(out / "barrier.csv", result, problem.barriers.obstacles)
        if result.path:
            write_path(out / "path.csv", result.path)
        if result.alt_path:
            write_path(out / "path_min_cost.csv", result.alt_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if status != EXIT_OK:
        return status

    params = problem.params
    for name in scenario["tracking.modes"]:
        mode = TrackingMode(Mode(name), scenario["tracking.position_noise"], scenario["tracking.momentum_noise"],
                            seed=scenario["planner.rng_seed"])
        track = track_open_loop if mode.mode is Mode.OPEN_LOOP else track_closed_loop
        try:
            report = track(result.path, params, mode)
        except SafePlanError as exc:
            print(f"tracking failed ({name}): {exc}", file=sys.stderr)
            return EXIT_PLANNING
        try:
            write_tracking(out / f"tracking_{name}.csv", report)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"{name}: max position error {report.max_position_error!r} m")
    print(f"nodes {len(result.tree)}, samples {result.samples}, path length {len(result.path)}; wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safeplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_ in (("run", cmd_run, "plan and track a scenario"),
                              ("validate", cmd_validate, "check a scenario without planning")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario", help="scenario file or bundled name (" + ", ".join(sc.bundled_names()) + ")")
        p.add_argument("--seed", type=int, default=None, help="overrides planner.rng_seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one key (repeatable)")
        if name == "run":
            p.add_argument("--out", default="out", help="output directory (default: out)")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
