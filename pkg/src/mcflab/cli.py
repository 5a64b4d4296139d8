"""Command-line front end: ``mcflab <command> --config PATH --out DIR``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile

from .config import ConfigError, parse_config
from .errors import MCFLabError
from .scenario import EXIT_USAGE, run_scenario

COMMANDS = {
    "oracle": "oracle",
    "flow": "flow",
    "harnack": "harnack",
    "diagnose": "diagnose",
    "rescale": "rescale",
    "suite": "full-suite",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcflab", description="Mean curvature flow verification scenarios.")
    parser.add_argument("command", choices=sorted(COMMANDS), help="scenario to run (overrides the config's scenario key)")
    parser.add_argument("--config", required=True, help="scenario configuration file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--tol-scale", type=float, help="multiply every check tolerance by this factor")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config's seed)")
    parser.add_argument("--format", choices=("csv", "json"), help="time-series report format")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def _ensure_writable(path: str):
    os.makedirs(path, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=path):
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        overrides = {"scenario": COMMANDS[args.command]}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.format is not None:
            overrides["output"] = cfg.output.__class__(cfg.output.dir, cfg.output.snapshots, args.format)
        if args.tol_scale is not None:
            overrides["checks"] = {"tol_scale": args.tol_scale}
        cfg = cfg.with_overrides(**overrides)
        out = args.out or cfg.output.dir
        if not out:
            raise ConfigError("no output directory: pass --out or set output.dir")
    except (OSError, MCFLabError) as exc:
        print(f"mcflab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _ensure_writable(out)
    except OSError as exc:
        print(f"mcflab: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run_scenario(cfg, out)
    except OSError as exc:
        print(f"mcflab: I/O failure: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MCFLabError as exc:
        print(f"mcflab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
