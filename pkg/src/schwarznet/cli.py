"""Command-line entry points: run an experiment, compare two reports."""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import PRESET_NAMES, apply_overrides, default_config, load_config, validate
from .errors import ConfigError, FormatError
from .reporting import compare_reports, run_experiment


def _resolve_config(arg):
    if arg in PRESET_NAMES:
        return default_config(arg)
    if Path(arg).exists():
        return load_config(arg)
    raise ConfigError(
        f"config {arg!r} is neither a preset name nor a file; presets: "
        + ", ".join(PRESET_NAMES))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schwarznet",
        description="Meshless PDE solving on decomposed domains with one "
                    "network per subdomain.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a preset name or INI file")
    run_p.add_argument("config", help=f"preset ({', '.join(PRESET_NAMES)}) or INI path")
    run_p.add_argument("--seed", type=int, default=None, help="override the run seed")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override one config value")

    cmp_p = sub.add_parser("compare", help="compare the final errors of two report.csv files")
    cmp_p.add_argument("report_a")
    cmp_p.add_argument("report_b")
    cmp_p.add_argument("--tolerance", type=float, default=5e-3,
                       help="pass/fail threshold on final max rel_l2 (default 5e-3)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            cfg = _resolve_config(args.config)
            cfg = apply_overrides(cfg, args.override)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            if args.out is not None:
                cfg = replace(cfg, out_dir=args.out)
            validate(cfg)
        except ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return 2
        result = run_experiment(cfg)
        if result.diverged:
            err = result.failure
            print(f"diverged at outer iteration {err.outer_iteration} "
                  f"(subdomain {err.subdomain}, epoch {err.epoch}); "
                  f"partial artifacts in {cfg.out_dir}", file=sys.stderr)
            return 3
        worst = max(result.history[-1].rel_l2.values()) if result.history else float("nan")
        print(f"completed {len(result.history)} outer iterations; "
              f"final max rel_l2 = {worst:.6e}; artifacts in {cfg.out_dir}")
        return 0
    if args.command == "compare":
        try:
            print(compare_reports(args.report_a, args.report_b, tolerance=args.tolerance))
        except FormatError as err:
            print(f"format error: {err}", file=sys.stderr)
            return 2
        return 0
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
