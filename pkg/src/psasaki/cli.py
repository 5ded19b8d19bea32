"""Command-line entry point: ``psasaki <command> --config run.yaml``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import COMMANDS, ConfigError, load_config
from .runner import ENGINE, run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psasaki", description="Pseudo-Sasakian geometry verification engine.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "verify": "structure axioms, curvature identities and submanifold suites",
        "second-variation": "closed-form second variation against the volume-flow oracle",
        "tanno": "Lorentzian deformation laws and stability equivalence for each alpha",
        "spectrum": "low Laplace-Beltrami spectrum of L and the stability verdict",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--seed", type=_seed, default=None, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=None, help="report path (JSON); default from config or report.json")
        p.add_argument("--tolerance-scale", type=_positive, default=1.0, help="multiplies every tolerance")
        p.add_argument("--csv", type=Path, default=None, help="prefix for CSV tables (eigenvalues, alpha)")
        p.add_argument("--quiet", action="store_true", help="only print the overall result")
    return parser


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, command=args.command, seed=args.seed, tolerance_scale=args.tolerance_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if args.out is not None:
            doc = {
                "engine": {"name": ENGINE, "version": __version__},
                "command": args.command,
                "passed": False,
                "errors": [{"stage": "config", "type": "ConfigError", "path": exc.path, "message": exc.message}],
                "records": [],
            }
            _write(args.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return EXIT_CONFIG

    report = run(cfg, args.command)
    out = args.out or Path(cfg.outputs["report"] or "report.json")
    _write(out, report.to_json())
    csv_prefix = args.csv or (Path(cfg.outputs["csv"]) if cfg.outputs["csv"] else None)
    if csv_prefix is not None:
        for name, text in report.csv_tables().items():
            _write(csv_prefix.with_name(f"{csv_prefix.name}_{name}.csv"), text)

    if not args.quiet:
        print(report.records.summary())
        for err in report.errors:
            print(f"error in {err['stage']}: {err['message']}", file=sys.stderr)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {len(report.records.records)} records, {len(report.records.failures())} failed -> {out}")
    return EXIT_PASS if report.passed else EXIT_FAIL
