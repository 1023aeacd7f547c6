"""Command line entry: run experiments, validate configs, re-emit reports.

Exit codes: 0 success, 1 configuration error, 2 training divergence (partial
artifacts are persisted before exiting).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import parse_config
from .diagnostics import emit_reports, load_record
from .errors import ConfigError, FormatError, TrainingDiverged
from .runner import run_experiment


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sitforge",
        description="Continual-learning experiment harness (class-incremental protocols "
                    "on dense networks)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, help="config path, or - for stdin")
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--seed-override", type=int, default=None,
                     help="replace the config's base seed")
    run.add_argument("--quiet", action="store_true", help="suppress progress output")

    val = sub.add_parser("validate", help="validate a config without running")
    val.add_argument("--config", required=True, help="config path, or - for stdin")

    rep = sub.add_parser("report", help="re-emit reports from persisted results")
    rep.add_argument("--from", dest="from_dir", required=True,
                     help="run or aggregate directory holding results.json")
    rep.add_argument("--out", default=None, help="write reports here instead of in place")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = parse_config(args.config)
            return run_experiment(config, out_dir=args.out,
                                  seed_override=args.seed_override, quiet=args.quiet)
        if args.command == "validate":
            config = parse_config(args.config)
            print(f"config ok: {len(config.strategies)} strategy/ies, "
                  f"{config.runs} run(s), "
                  f"schedule {config.scenario['class_schedule']}")
            return 0
        if args.command == "report":
            results = Path(args.from_dir) / "results.json"
            if not results.exists():
                raise ConfigError(f"no results.json under {args.from_dir}")
            record = load_record(results)
            emit_reports(record, args.out or args.from_dir)
            return 0
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
