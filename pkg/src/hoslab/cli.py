"""Command line: ``hoslab <experiment> [--config FILE] [--set key=value ...] [--out DIR] [--jobs N]``.

Exit status is 0 when every verdict passes, 1 when any fails or aborts, and
2 for configuration errors (nothing is computed in that case).
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, output_root, run, run_directory

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hoslab", description="Run one numerical experiment and write its record.")
    parser.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted override, e.g. grid.n=512 or sweep.N=[4,8,16]; repeatable")
    parser.add_argument("--out", help="output directory (beats $HOSLAB_OUT and the config)")
    parser.add_argument("--jobs", type=int, help="worker threads for sweep points")
    return parser


def _load(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        mapping = _load(args.config)
        overrides = list(args.overrides)
        if args.jobs is not None:
            overrides.append(f"jobs={args.jobs}")
        cfg = ExperimentConfig.from_mapping(mapping, name=args.experiment, overrides=overrides)
        record = run(cfg, out=args.out)
    except ConfigError as exc:
        print(f"hoslab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    directory = run_directory(cfg, output_root(cfg, args.out))
    for v in record.verdicts:
        value = "" if v.value is None else f" value={v.value:.6g}"
        print(f"{v.status.upper():13s} {v.criterion}{value}  {v.detail}")
    print(f"record: {directory / 'record.json'}  ({record.wall_clock_seconds:.2f} s)")
    return EXIT_PASS if record.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
