"""Command line entry point.

    fracdiff run --config cfg.txt [--out DIR] [--threads N]
    fracdiff decay --config cfg.txt ...        (subcommand name must match the config)
    fracdiff list
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .experiments import REGISTRY, ExperimentFailed, _failure_record, run_experiment


def _add_common(p):
    p.add_argument("--config", required=True, help="flat key = value experiment file")
    p.add_argument("--out", default=None, help="output directory (default: output_dir from the config)")
    p.add_argument("--threads", type=int, default=1, help="parallel refinement levels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracdiff", description="Fractional porous-medium / fast-diffusion experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run the experiment named in the config"))
    for name, fn in sorted(REGISTRY.items()):
        _add_common(sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0]))
    sub.add_parser("list", help="list registered experiments")
    return parser


def _fail(record: dict) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in sorted(REGISTRY):
            print(name)
        return 0
    if args.threads < 1:
        return _fail(_failure_record(None, ConfigError("--threads", "must be at least 1")))
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(_failure_record(None, exc))
    if args.command != "run" and args.command != cfg.experiment:
        exc = ConfigError("config.experiment", f"config is for {cfg.experiment!r}, subcommand is {args.command!r}")
        return _fail(_failure_record(cfg.experiment, exc))
    try:
        summary = run_experiment(cfg, args.out, args.threads)
    except ExperimentFailed as exc:
        return _fail(exc.record)
    print(json.dumps(summary["result"], sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
