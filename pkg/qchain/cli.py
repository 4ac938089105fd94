"""Command-line surface: ``qchain-sim <config> [--seed N] [--format json|text] [--out PATH]``.

Exit codes: 0 success, 2 invalid config (or a module precondition the
config violates), 3 a scenario expectation failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from .config import SCENARIO_NAMES, load_scenario_config
from .errors import ConfigError, QchainError
from .report import FORMATS, emit
from .scenarios import run_scenario

_LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID_CONFIG = 2
EXIT_EXPECTATION_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qchain-sim",
        description="Deterministic quantum-threat blockchain simulator. "
        f"Scenarios: {', '.join(SCENARIO_NAMES)}.",
    )
    parser.add_argument("config", type=Path, help="Scenario config file (.json, .yaml or .yml)")
    parser.add_argument("--seed", type=int, default=None, help="Override the config's master_seed")
    parser.add_argument("--format", choices=FORMATS, default="json", help="Report format (default json)")
    parser.add_argument("--out", type=Path, default=None, help="Write the report here instead of stdout")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_scenario_config(args.config, seed_override=args.seed)
    except ConfigError as e:
        print(f"qchain-sim: invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID_CONFIG

    try:
        report = run_scenario(config)
    except QchainError as e:
        print(f"qchain-sim: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID_CONFIG

    data = emit(report, args.format)
    if args.out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        args.out.write_bytes(data)
        _LOG.info("Report written to %s", args.out)

    return EXIT_OK if report.passed else EXIT_EXPECTATION_FAILED
