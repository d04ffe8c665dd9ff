"""
Command-line entry point for the aTCWS verifier.

Builds the argument parser, includes every subcommand and maps errors to
exit codes: 0 holds, 1 fails, 2 inconclusive, 3 usage or parse error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .commands import COMMANDS
from .config import settings_scope
from .errors import AtcwsError

logger = logging.getLogger(__name__)

# Flags that override Settings fields of the same name
SETTING_FLAGS = (
    "max_sigma",
    "deduction_depth",
    "candidate_depth",
    "max_candidates",
    "tau_bound",
    "state_budget",
    "jobs",
    "log_level",
)


def shared_flags() -> argparse.ArgumentParser:
    """Parent parser with the options every subcommand accepts."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, help="JSON settings file")
    parent.add_argument("--log-level", help="Logging level (default WARNING)")
    parent.add_argument("--max-sigma", type=int, help="Sigma layers explored")
    parent.add_argument("--deduction-depth", type=int, help="Composition slack for deducibility")
    parent.add_argument("--candidate-depth", type=int, help="Constructor depth of attacker candidates")
    parent.add_argument("--max-candidates", type=int, help="Per-slot cap on attacker candidates")
    parent.add_argument("--tau-bound", type=int, help="Longest tau path in one weak step")
    parent.add_argument("--state-budget", type=int, help="Largest state or pair table")
    parent.add_argument("--jobs", type=int, help="Worker threads for independent queries")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atcws",
        description="Bounded verifier for timed broadcast protocols in wireless sensor networks",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    parents = [shared_flags()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name; sys.argv when None.

    Returns:
        The process exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 3
    overrides = {flag: getattr(args, flag) for flag in SETTING_FLAGS}
    try:
        with settings_scope(args.config, overrides) as settings:
            logger.debug("running %s with %s", args.command, settings)
            return args.handler(args, settings)
    except AtcwsError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
