"""Command-line entry point: ``bellchannel <experiment> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, load_config
from .figures import RUNNERS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellchannel",
        description="Bell-test statistics for entangled light through fluctuating-loss channels.")
    parser.add_argument("experiment", choices=EXPERIMENTS, help="what to run")
    parser.add_argument("--config", type=Path, default=None, help="INI configuration file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for grid points")
    parser.add_argument("--format", choices=("csv", "csv+svg"), default="csv+svg",
                        dest="fmt", help="output files to write")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, experiment=args.experiment, out=args.out,
                          seed=args.seed, threads=args.threads)
        start = time.perf_counter()
        result = RUNNERS[args.experiment](cfg)
        written = result.write(cfg.out, args.fmt)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start
    for path in written:
        print(path)
    if result.rows is not None and args.experiment == "oracle-check":
        for row in result.rows:
            print("  ".join(str(v) for v in row))
    print(f"{args.experiment} finished in {elapsed:.1f} s", file=sys.stderr)
    if result.passed is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
