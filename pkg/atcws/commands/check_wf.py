"""
check-wf: well-formedness and well-timedness of every network in a model.
"""

import argparse

from ..models import CheckReport, Settings, Verdict
from ..syntax import check_well_formed, well_timed_violations
from .common import add_source_arguments, exit_code, load_source, print_reports, select_networks

NAME = "check-wf"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        NAME, parents=parents, help="Check well-formedness and time-guarded recursion"
    )
    add_source_arguments(parser)
    parser.add_argument("--network", action="append", help="Network to check; repeatable")
    parser.add_argument("--no-connectivity", action="store_true",
                        help="Skip the in-network connectivity clause")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """
    Check the selected networks.

    Returns:
        0 when every network passes, 1 otherwise.
    """
    model = load_source(args, settings)
    names = args.network or (["system"] if args.protocol else None)
    reports = []
    for name, m in select_networks(model, names).items():
        report = check_well_formed(m, connectivity=not args.no_connectivity)
        report.subject = f"{name}: {report.subject}"
        reports.append(report)
        timing = well_timed_violations(m)
        reports.append(CheckReport(
            check="well-timedness",
            subject=name,
            verdict=Verdict.FAILS if timing else Verdict.HOLDS,
            violations=timing,
        ))
    print_reports(reports)
    return exit_code(reports)
