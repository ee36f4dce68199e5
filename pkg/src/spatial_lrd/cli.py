"""Command line entry point.

    spatial-lrd <command> --config <path> [--out <dir>] [--seed <u64>]
                [--threads <n>]

Commands: scan, decompose, limits, mc, report.  Exit status: 0 on success,
1 on configuration errors, 2 on runtime failures; errors are printed to
stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import COMMANDS, ConfigError, parse_config
from .numerics import json_canonical
from .report import run_command


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatial-lrd",
        description="Variance growth and CLT diagnostics for spatial linear "
                    "processes over inflated sampling regions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("scan", "per-lambda variance scan and growth slope"),
        ("decompose", "interior/exterior/boundary variance decomposition"),
        ("limits", "limiting-variance functionals for the classified regime"),
        ("mc", "Monte Carlo CLT report at the largest lambda"),
        ("report", "full report: scan + decomposition + limits + CLT + figures"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the INI run config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for the FFT path")
        p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json_canonical({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return _fail("config-io", str(exc), 1)
    try:
        cfg = parse_config(text, base_dir=os.path.dirname(os.path.abspath(args.config)))
        overrides = {"command": args.command}
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if args.threads is not None:
            overrides["workers"] = args.threads
        if args.out is not None:
            overrides["out_dir"] = args.out
        cfg = dataclasses.replace(cfg, **overrides)
        if cfg.command not in COMMANDS:
            raise ConfigError(f"unknown command {cfg.command!r}")
        if cfg.command in ("mc", "report") and cfg.replicates < 100:
            raise ConfigError("experiment.replicates: need >= 100 for mc reports")
    except ConfigError as exc:
        return _fail("validation", str(exc), 1)
    progress = None if args.quiet else (lambda msg: print(f"[spatial-lrd] {msg}", flush=True))
    try:
        written = run_command(cfg, progress=progress)
    except ConfigError as exc:
        return _fail("validation", str(exc), 1)
    except Exception as exc:  # noqa: BLE001 - surface as runtime error JSON
        return _fail("runtime", f"{type(exc).__name__}: {exc}", 2)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
