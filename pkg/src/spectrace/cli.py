"""Command-line entry point.

Usage:
    spectrace spectrum --config run.json --out out/
    spectrace counting --config run.json
    spectrace perturb  --config run.json --threads 4
    spectrace trace    --config run.json
    spectrace oracle   --config run.json
    spectrace verify   [--config run.json]

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 invariant failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import pipelines
from .config import load_config
from .errors import InvariantError, SpectraceError
from .verify import run_verify

log = logging.getLogger("spectrace")

COMMANDS = ("spectrum", "counting", "perturb", "trace", "oracle", "verify")


def _workers(args, cfg) -> int:
    if args.threads is not None:
        return args.threads
    if cfg.workers is not None:
        return cfg.workers
    return os.cpu_count() or 1


def run(command: str, config: str | None = None, out: str | None = None, threads: int | None = None) -> list[Path]:
    """Run one command; raises SpectraceError subclasses on failure."""
    cfg = load_config(config)
    args = argparse.Namespace(threads=threads)
    workers = _workers(args, cfg)
    out_dir = Path(out or cfg.output["directory"])
    if command == "spectrum":
        return pipelines.run_spectrum(cfg, out_dir)
    if command == "counting":
        return pipelines.run_counting(cfg, out_dir)
    if command == "perturb":
        return pipelines.run_perturb(cfg, out_dir, workers)
    if command == "trace":
        return pipelines.run_trace(cfg, out_dir, workers)
    if command == "oracle":
        return pipelines.run_oracle(cfg, out_dir)
    if command == "verify":
        paths, passed = run_verify(cfg, out_dir, workers)
        if not passed:
            raise InvariantError(f"invariant checks failed; see {paths[0]}")
        return paths
    raise SpectraceError(f"unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectrace", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        s.add_argument("--threads", type=int, help="worker count for per-channel tasks")
        s.add_argument("--seed", type=int, help="accepted for compatibility; the pipelines use no randomness")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    try:
        paths = run(args.command, args.config, args.out, args.threads)
    except SpectraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
