#!/usr/bin/env python3
"""
Command-line driver for the Hardy-Bellman laboratory.

Subcommands: bellman, extremal, optimize, simulate, verify.
Exit codes: 0 success, 2 domain or configuration error, 3 acceptance failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .acceptance import SUITES, cmd_verify, require_pass
from .config import LabSettings, load_experiment_config
from .experiments import cmd_bellman, cmd_extremal, cmd_optimize, cmd_simulate
from .models import AcceptanceFailure, DomainError
from .reporting import print_summary, write_report

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCEPTANCE = 3

COMMANDS = {
    "bellman": cmd_bellman,
    "extremal": cmd_extremal,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}

# Flag destinations forwarded to ExperimentConfig when given
CONFIG_KEYS = [
    "p", "f", "F", "cells", "a", "depth", "seed", "out", "only", "branching", "gamma",
    "samples", "runs", "max_iters", "cutoff", "method",
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument('--p', type=float, default=None, help='Exponent p > 1 (default: 2)')
    common.add_argument('--f', type=float, default=None, help='First moment f > 0 (default: 1)')
    common.add_argument('--F', type=float, default=None, help='p-th moment F >= f^p (default: 2)')
    common.add_argument('--cells', type=int, default=None, help='Grid cells (command-specific default)')
    common.add_argument('--a', type=float, default=None,
                        help='Single alpha-tree parameter in (0, 1) instead of the sweep schedule')
    common.add_argument('--depth', type=int, default=None,
                        help='Dyadic depth for the symmetrization sweep, or alpha-tree depth in branching mode')
    common.add_argument('--seed', type=int, default=None, help='Base random seed (default: 0)')
    common.add_argument('--config', default=None, help='JSON config file; keys mirror the flag names')
    common.add_argument('--out', default=None, help='Output directory for JSON/CSV (HBL_OUT overrides)')
    common.add_argument('--only', nargs='+', default=None, choices=list(SUITES),
                        help='Acceptance suites to run (verify only)')
    common.add_argument('--branching', type=int, default=None, help='Alpha-tree branching factor (default: 1)')
    common.add_argument('--gamma', type=float, default=None, help='Sandwich window (0, gamma] (default: 1)')
    common.add_argument('--samples', type=int, default=None, help='Random leaf functions per sweep (default: 200)')
    common.add_argument('--runs', type=int, default=None, help='Optimizer seeds (default: 5)')
    common.add_argument('--max-iters', dest='max_iters', type=int, default=None,
                        help='Optimizer iteration cap (default: 2000)')
    common.add_argument('--cutoff', choices=['mass', 'time'], default=None,
                        help='Truncation rule for the truncation family (default: mass)')
    common.add_argument('--method', choices=['auto', 'exact', 'quad'], default=None,
                        help='Cell integration: auto (exact for integer p), exact, quad')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')

    parser = argparse.ArgumentParser(
        description='Hardy-Bellman Laboratory - extremal problems for the Hardy operator',
        allow_abbrev=False,
    )
    subparsers = parser.add_subparsers(dest='command', required=True, help='Experiment to run')
    subparsers.add_parser('bellman', parents=[common], allow_abbrev=False,
                          help='omega_p(f^p/F) and the Bellman value B_p(f, F)')
    subparsers.add_parser('extremal', parents=[common], allow_abbrev=False,
                          help='Extremal function g0, its discretization and near-extremal families')
    subparsers.add_parser('optimize', parents=[common], allow_abbrev=False,
                          help='Projected-gradient ascent of Phi_p from several seeds')
    subparsers.add_parser('simulate', parents=[common], allow_abbrev=False,
                          help='Alpha-tree sandwich sweep and symmetrization property sweep')
    subparsers.add_parser('verify', parents=[common], allow_abbrev=False,
                          help='Run the acceptance suites')
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in CONFIG_KEYS if getattr(args, key, None) is not None}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG

    try:
        settings = LabSettings()
        level = logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
        logging.basicConfig(level=level, format=LOG_FORMAT)
        logging.getLogger().setLevel(level)

        config = load_experiment_config(args.config, _overrides(args))
        out_dir = settings.OUT or config.out

        logger.info("=" * 60)
        logger.info(f"HARDY-BELLMAN LAB: {args.command}")
        logger.info("=" * 60)
        logger.info(f"p={config.p}, f={config.f}, F={config.F}, seed={config.seed}")
        logger.info(f"Output: {out_dir or 'None (print only)'}")

        report = COMMANDS[args.command](config, settings)
    except (DomainError, ValidationError) as exc:
        logger.error(f"[FAIL] {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if out_dir:
        write_report(report, Path(out_dir))
    print_summary(report)

    if args.command == "verify":
        try:
            require_pass(report)
        except AcceptanceFailure as exc:
            logger.error(f"[FAIL] {len(exc.failed)} check(s) failed: {', '.join(exc.failed)}")
            return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
