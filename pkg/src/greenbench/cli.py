"""Command-line entry point.

Exit codes: 0 when every trial succeeded, 1 when any trial failed, 2 for
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys

from .errors import GreenbenchError, InvariantError
from .export import TIME_FORMAT, export_csv
from .scenarios import ScenarioConfig, TrialResult, run_matrix, run_scenario

EXIT_OK, EXIT_TRIAL_FAILED, EXIT_USAGE = 0, 1, 2


def _payload(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 70.0:
        raise argparse.ArgumentTypeError("payload must lie in [0, 70] kg")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _timestamp(text: str) -> dt.datetime:
    try:
        return dt.datetime.strptime(text, TIME_FORMAT)
    except ValueError:
        raise argparse.ArgumentTypeError("expected yyyy_mm_dd_hh_mm_ss") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="greenbench",
        description="Run greenhouse mobile-robot control benchmark trials.",
    )
    p.add_argument("--category", type=int, choices=(1, 2, 3), default=1, help="1 low level, 2 mid level, 3 full stack")
    p.add_argument("--payload", type=_payload, default=0.0, help="payload mass in kg, 0 to 70")
    p.add_argument("--terrain-slope", action="store_true", help="enable the ground slope")
    p.add_argument("--change-terrain", action="store_true", help="enable the terrain sectors")
    p.add_argument("--trials", type=_positive_int, default=1, help="trials per scenario")
    p.add_argument("--seed", type=int, default=0, help="base seed for the noise streams")
    p.add_argument("--out-dir", default=".", help="root directory for result/category_<n>/ CSV files")
    p.add_argument("--params", help="parameter file for the selected category's own layer")
    p.add_argument("--c1-params", help="low-level parameter file")
    p.add_argument("--c2-params", help="mid-level parameter file")
    p.add_argument("--c3-params", help="global planner parameter file")
    p.add_argument("--world", help="world description file")
    p.add_argument("--matrix", action="store_true", help="sweep slope x terrain x payload {0, 70}")
    p.add_argument("--no-noise", action="store_true", help="ideal encoders and range sensor")
    p.add_argument("--same-seed", action="store_true", help="reuse the first trial's noise in every trial")
    p.add_argument("--timestamp", type=_timestamp, help="fixed file timestamp yyyy_mm_dd_hh_mm_ss")
    return p


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    files = {1: args.c1_params, 2: args.c2_params, 3: args.c3_params}
    if args.params:
        files[args.category] = args.params
    return ScenarioConfig(
        category=args.category,
        payload=args.payload,
        terrain_slope=args.terrain_slope,
        change_terrain=args.change_terrain,
        trials=args.trials,
        seed=args.seed,
        out_dir=args.out_dir,
        c1_params=files[1],
        c2_params=files[2],
        c3_params=files[3],
        world_file=args.world,
        noise=not args.no_noise,
        same_seed=args.same_seed,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    clock = (lambda: args.timestamp) if args.timestamp else None

    def on_trial(config: ScenarioConfig, result: TrialResult) -> None:
        if result.log is None:
            return
        path = export_csv(result.log, args.out_dir, result.report, cause=result.cause, clock=clock)
        status = f"FAILED ({result.cause})" if result.failed else "ok"
        print(
            f"trial {result.trial} slope={'on' if config.terrain_slope else 'off'} "
            f"terrain={'on' if config.change_terrain else 'off'} payload={config.payload:g}: {status} -> {path}"
        )

    try:
        config = config_from_args(args)
        run = run_matrix if args.matrix else run_scenario
        table = run(config, on_trial=on_trial)
    except (GreenbenchError, InvariantError) as exc:
        print(f"greenbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(table.to_text(), end="")
    return EXIT_TRIAL_FAILED if table.any_failed else EXIT_OK
