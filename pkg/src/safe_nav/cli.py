"""Command-line front end.

    safe-nav run --scenario PATH --out DIR [--mode offset|center] [--dt SECONDS]
    safe-nav batch --glob PATTERN --out DIR [--jobs N]

Exit codes: 0 goal reached, 2 collision, 3 timeout, 4 QP infeasible,
1 usage, parse or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import glob
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import scenario_io
from .sim import Outcome, Scenario, SimResult, run

log = logging.getLogger("safe_nav")

EXIT_CODES = {
    Outcome.GOAL_REACHED: 0,
    Outcome.COLLISION: 2,
    Outcome.TIMEOUT: 3,
    Outcome.SAFETY_INFEASIBLE: 4,
}
EXIT_ERROR = 1
# batch exit code is the most severe one seen
_SEVERITY = {0: 0, 3: 1, 4: 2, 2: 3, 1: 4}


class CliError(Exception):
    pass


def _configure_logging() -> None:
    level = os.environ.get("SAFE_NAV_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(path: str, mode: str | None, dt: float | None) -> Scenario:
    try:
        sc = scenario_io.load_scenario(path)
    except FileNotFoundError:
        raise CliError(f"scenario not found: {path}") from None
    except scenario_io.ScenarioError as exc:
        raise CliError(f"malformed scenario {path}: {exc}") from None
    except OSError as exc:
        raise CliError(f"cannot read scenario {path}: {exc}") from None
    cfg = sc.controller
    if mode is not None:
        cfg = dataclasses.replace(cfg, cbf=dataclasses.replace(cfg.cbf, mode=mode))
    try:
        return dataclasses.replace(sc, controller=cfg, dt=sc.dt if dt is None else dt)
    except ValueError as exc:
        raise CliError(f"invalid override for {path}: {exc}") from None


def _fmt_opt(x, fmt: str, unit: str = "", scale: float = 1.0) -> str:
    return "n/a" if x is None else format(scale * x, fmt) + unit


def summary_line(result: SimResult) -> str:
    m = result.metrics
    return (f"{result.scenario.name}: {result.outcome.value} "
            f"time_to_goal={_fmt_opt(m['time_to_goal'], '.2f', 's')} "
            f"min_h={_fmt_opt(m['min_h'], '.4g')} "
            f"mean_solve_time={_fmt_opt(m['mean_solve_time'], '.3f', 'ms', 1e3)}")


def _write(result: SimResult, out_dir: Path, figures: bool) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        scenario_io.write_result(result, out_dir)
        if figures:
            from .plotting import render_figures
            render_figures(result, out_dir)
    except OSError as exc:
        raise CliError(f"cannot write output to {out_dir}: {exc}") from None


def _run_one(path: str, out_dir: Path, mode: str | None, dt: float | None,
             figures: bool) -> tuple[int, SimResult | None, str]:
    try:
        sc = _load(path, mode, dt)
        result = run(sc)
        _write(result, out_dir, figures)
    except CliError as exc:
        return EXIT_ERROR, None, str(exc)
    return EXIT_CODES[result.outcome], result, summary_line(result)


def cmd_run(args: argparse.Namespace) -> int:
    code, _, line = _run_one(args.scenario, Path(args.out), args.mode, args.dt, args.figures)
    print(line, file=sys.stderr if code == EXIT_ERROR else sys.stdout)
    return code


def _batch_job(job):
    path, out_dir, figures = job
    code, result, line = _run_one(path, out_dir, None, None, figures)
    row = None
    if result is not None:
        m = result.metrics
        row = [result.scenario.name, result.outcome.value, m["time_to_goal"], m["min_h"],
               m["mean_solve_time"]]
    return code, row, line


def cmd_batch(args: argparse.Namespace) -> int:
    paths = sorted(glob.glob(args.glob))
    if not paths:
        print(f"no scenario files match {args.glob!r}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out)
    jobs = [(p, out / Path(p).stem, args.figures) for p in paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "outcome", "time_to_goal", "min_h", "mean_solve_time"])
    worst = 0
    for (path, _, _), (code, row, line) in zip(jobs, results):
        print(line, file=sys.stderr if code == EXIT_ERROR else sys.stdout)
        if row is None:
            row = [Path(path).stem, "Error", None, None, None]
        w.writerow(["" if v is None else v for v in row])
        if _SEVERITY[code] > _SEVERITY[worst]:
            worst = code
    try:
        out.mkdir(parents=True, exist_ok=True)
        scenario_io.atomic_write(out / "aggregate.csv", buf.getvalue())
    except OSError as exc:
        print(f"cannot write output to {out}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safe-nav", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=["offset", "center"], help="override the CBF mode")
    p.add_argument("--dt", type=float, help="override the simulation step [s]")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip the PNG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="simulate every scenario matching a glob")
    p.add_argument("--glob", required=True, help="glob pattern for scenario files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip the PNG figures")
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else 0
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
