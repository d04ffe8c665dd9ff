"""
time-props: the timing laws over random networks or a given model.
"""

import argparse
from pathlib import Path

from ..lts import time_property_violations
from ..models import Bounds, CheckReport, Settings, Verdict
from ..sampling import time_property_suite
from .common import exit_code, load_source, print_reports, select_networks

NAME = "time-props"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        NAME, parents=parents,
        help="Check time determinism, patience, maximal progress and well-timedness",
    )
    parser.add_argument("source", nargs="?", type=Path, help="Model file; random networks when omitted")
    parser.add_argument("--protocol", help="Use a bundled protocol instead of a model file")
    parser.add_argument("--variant", help="Protocol variant")
    parser.add_argument("--network", action="append", help="Network to check; repeatable")
    parser.add_argument("--count", type=int, default=500, help="Random networks to draw")
    parser.add_argument("--seed", type=int, default=2024, help="Random seed")
    parser.add_argument("--sigma-layers", type=int, default=4,
                        help="Sigma layers explored per random network")
    parser.add_argument("--step-budget", type=int, default=64,
                        help="Largest instantaneous run allowed between sigmas")
    parser.set_defaults(handler=run, n=None, s=None, h=None)


def run(args: argparse.Namespace, settings: Settings) -> int:
    if args.source is None and not args.protocol:
        report = time_property_suite(
            count=args.count,
            seed=args.seed,
            max_sigma=args.sigma_layers,
            step_budget=args.step_budget,
            state_budget=settings.state_budget,
        )
        print_reports([report])
        return report.exit_code
    model = load_source(args, settings)
    reports = []
    for name, m in select_networks(model, args.network).items():
        violations, complete = time_property_violations(
            m, settings.max_sigma, args.step_budget, settings.state_budget
        )
        if violations:
            verdict = Verdict.FAILS
        elif not complete:
            verdict = Verdict.INCONCLUSIVE
        else:
            verdict = Verdict.HOLDS
        reports.append(CheckReport(
            check="time-props",
            subject=name,
            verdict=verdict,
            bounds=Bounds(max_sigma=settings.max_sigma),
            violations=violations,
            notes=[] if complete else [f"state budget {settings.state_budget} exceeded"],
        ))
    print_reports(reports)
    return exit_code(reports)
