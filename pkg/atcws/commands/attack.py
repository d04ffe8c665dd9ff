"""
attack: replay the scripted attack on a bundled protocol.
"""

import argparse
from pathlib import Path

from ..models import Settings
from ..protocols import list_protocols, replay_attack
from .common import add_size_arguments, print_report, protocol_params, write_traces

NAME = "attack"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(NAME, parents=parents, help="Replay the known attack on a protocol")
    parser.add_argument("protocol", choices=list_protocols(), help="Bundled protocol")
    add_size_arguments(parser)
    parser.add_argument("--trace-out", type=Path, help="Write the attack trace here")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """
    Returns:
        1 when the attack breaks the timing bound, 0 when it is rejected.
    """
    report = replay_attack(
        args.protocol,
        max_sigma=settings.max_sigma,
        tau_bound=settings.tau_bound,
        state_budget=settings.state_budget,
        **protocol_params(args.protocol, args, settings),
    )
    print_report(report)
    write_traces(report, args.trace_out)
    return report.exit_code
