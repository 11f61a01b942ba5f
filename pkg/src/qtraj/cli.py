"""Command-line driver.

    qtraj {trajectory,fisher,sweep,qfi} [--config PATH] [--seed N] [--out DIR] [--workers N]

Exit codes: 0 success, 2 configuration error, 3 numerical failure. On
failure a JSON error record is printed to stderr and, when possible, written
to ``<out>/error.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments
from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COMMANDS = {
    "trajectory": experiments.run_trajectory_demo,
    "fisher": experiments.run_fisher_experiment,
    "sweep": experiments.run_operator_sweep,
    "qfi": experiments.run_qfi,
}

log = logging.getLogger("qtraj")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtraj", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "trajectory": "one trajectory: Bloch components, record and log-likelihood",
        "fisher": "single and ensemble Fisher information with the QFI reference",
        "sweep": "ensemble Fisher information for sigma_x, sigma_y and sigma_z",
        "qfi": "closed-system quantum Fisher information curve",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="key = value or JSON config file")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--workers", type=int, help="parallel worker processes")
    return parser


def _configure_logging():
    level = os.environ.get("QTRAJ_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _error_record(kind, exc, out):
    record = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")
        except OSError:
            pass


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {
        k: v for k, v in (("seed", args.seed), ("workers", args.workers)) if v is not None
    }
    if args.out is not None:
        overrides["out"] = str(args.out)
    try:
        return replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    _configure_logging()
    out = None
    try:
        args = build_parser().parse_args(argv)
        out = args.out  # so a rejected config still leaves error.json behind
        cfg = resolve_config(args)
        out = Path(cfg.out)
        paths = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        _error_record("config", exc, out)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError) as exc:
        log.debug("numerical failure", exc_info=True)
        _error_record("numerical", exc, out)
        return EXIT_NUMERICAL
    for name, path in paths.items():
        log.info("wrote %s: %s", name, path)
    print(json.dumps({"status": "ok", "artifacts": {k: str(v) for k, v in paths.items()}}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
