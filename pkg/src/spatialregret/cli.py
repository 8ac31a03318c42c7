"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical or solver failure,
3 stability failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import config as C
from . import pipeline as P
from .errors import (
    ConfigError,
    SpatialRegretError,
    StabilityLost,
    UnstableClosedLoop,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_STABILITY = 0, 1, 2, 3
OUTPUT_ENV = "SPREG_OUTPUT_DIR"

log = logging.getLogger("spatialregret")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="YAML or JSON run configuration (defaults: 5-bus case study)")
    common.add_argument("--output-dir", "-o", help=f"run directory (overrides ${OUTPUT_ENV} and output_dir)")
    common.add_argument("--grid-points", type=int, help="override grid.points")
    common.add_argument("--max-iter", type=int, help="override synthesis.max_iter")
    common.add_argument("--seed", type=int, help="override seed")
    common.add_argument("--full-scale", action="store_true", help="600-point grid and 30 iterations")
    common.add_argument("--threads", type=int, help="cap BLAS/solver worker threads")
    common.add_argument("--timing", action="store_true",
                        help="record solver times in history.csv (breaks byte-identical reruns)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="spatialregret",
        description="Structured controller synthesis from frequency-response data.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="configuration keys (with defaults):\n" + C.describe_keys()
        + f"\n\nenvironment:\n  {OUTPUT_ENV}  run directory when --output-dir is not given"
        + "\n\nexit codes: 0 ok, 1 config error, 2 numerical/solver failure, 3 stability failure",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate-experiments", parents=[common], help="simulate identification experiments")
    sub.add_parser("estimate-frf", parents=[common], help="estimate G22 and assemble the plant FRF")
    syn = sub.add_parser("synthesize", parents=[common], help="synthesize one controller")
    syn.add_argument("--objective", choices=["oracle", "h2", "hinf", "regret"],
                     help="override synthesis.objective")
    ev = sub.add_parser("evaluate", parents=[common], help="frequency and time-domain evaluation")
    ev.add_argument("controllers", nargs="*",
                    help="controller names under controllers/ or controller.json paths (default: all)")
    rep = sub.add_parser("reproduce-case-study", parents=[common], help="run every stage end to end")
    rep.add_argument("--force", action="store_true", help="allow a non-empty output directory")
    return parser


def resolve_config(args) -> C.RunConfig:
    cfg = C.load_config(args.config) if args.config else C.RunConfig().validate()
    if args.full_scale:
        cfg = C.full_scale(cfg)
    if args.grid_points is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, points=args.grid_points))
    if args.max_iter is not None:
        cfg = replace(cfg, synthesis=replace(cfg.synthesis, max_iter=args.max_iter))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    return replace(cfg, output_dir=str(out)).validate()


def _run(args) -> int:
    cfg = resolve_config(args)
    layout = P.Layout(Path(cfg.output_dir))
    cmd = args.command
    if cmd == "simulate-experiments":
        with P.stage(cmd):
            paths = P.simulate_experiments(cfg, layout)
        print(f"wrote {len(paths)} experiment files to {layout.experiments}")
    elif cmd == "estimate-frf":
        with P.stage(cmd):
            P.estimate_plant(cfg, layout)
        print(f"wrote {layout.plant_csv}")
    elif cmd == "synthesize":
        objective = args.objective or cfg.synthesis.objective
        with P.stage(f"synthesize {objective}"):
            P.synthesize_stage(cfg, layout, objective, args.timing)
        print(f"wrote {layout.controller_dir(objective)}")
    elif cmd == "evaluate":
        with P.stage(cmd):
            summary = P.evaluate_stage(cfg, layout, args.controllers)
        print((layout.evaluation / "summary.txt").read_text(), end="")
        if summary.unstable:
            print(f"unstable closed loop: {', '.join(summary.unstable)}", file=sys.stderr)
            return EXIT_STABILITY
    elif cmd == "reproduce-case-study":
        summary = P.reproduce_case_study(cfg, layout, args.force, args.timing)
        print((layout.evaluation / "summary.txt").read_text(), end="")
        if summary.unstable:
            return EXIT_STABILITY
    return EXIT_OK


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (StabilityLost, UnstableClosedLoop)):
        return EXIT_STABILITY
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            with threadpool_limits(limits=args.threads):
                return _run(args)
        return _run(args)
    except (SpatialRegretError, ValueError, OSError) as exc:
        where = getattr(exc, "stage", None)
        prefix = f"stage {where} failed: " if where else "error: "
        print(prefix + f"{type(exc).__name__}: {exc}", file=sys.stderr)
        if isinstance(exc, (ValueError, OSError)) and not isinstance(exc, SpatialRegretError):
            # bad values that slipped past validation are configuration problems
            return EXIT_CONFIG if where is None else EXIT_NUMERICAL
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
