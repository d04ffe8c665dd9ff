"""
sim: bounded weak simulation or bisimulation between two networks.
"""

import argparse
from pathlib import Path

from ..equivalence import SimResult, bisimilar, simulates
from ..lts import format_label
from ..models import Bounds, CheckReport, Settings
from ..syntax import Network
from .common import add_source_arguments, load_source, print_report, select_networks, write_traces

NAME = "sim"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(NAME, parents=parents, help="Check that one network simulates another")
    parser.add_argument("impl", help="Network whose moves must be matched")
    parser.add_argument("spec", help="Network that must match them")
    add_source_arguments(parser)
    parser.add_argument("--bisim", action="store_true", help="Check weak bisimilarity instead")
    parser.add_argument("--trace-out", type=Path, help="Write the counterexample trace here")
    parser.set_defaults(handler=run)


def simulation_report(
    impl_name: str,
    impl: Network,
    spec_name: str,
    spec: Network,
    max_sigma: int,
    settings: Settings,
    bisim: bool = False,
) -> CheckReport:
    if bisim:
        result = bisimilar(impl, spec, max_sigma, tau_bound=settings.tau_bound,
                           state_budget=settings.state_budget)
    else:
        result = simulates(spec, impl, max_sigma, tau_bound=settings.tau_bound,
                           state_budget=settings.state_budget, unfold_bound=settings.unfold_bound)
    relation = "~" if bisim else "<="
    return CheckReport(
        check="bisim" if bisim else "sim",
        subject=f"{impl_name} {relation} {spec_name}",
        verdict=result.verdict,
        bounds=Bounds(max_sigma=max_sigma),
        evidence=_evidence(result),
        notes=list(result.notes),
        traces=result.traces("counterexample"),
    )


def _evidence(result: SimResult):
    evidence = [f"explored {result.explored_pairs} pairs"]
    if result.counterexample is not None:
        evidence.append(f"unmatched label: {format_label(result.counterexample.blocking)}")
        if result.counterexample.branching:
            evidence.append("the trace runs on both sides but the states stop being related")
    return evidence


def run(args: argparse.Namespace, settings: Settings) -> int:
    model = load_source(args, settings)
    selected = select_networks(model, [args.impl, args.spec])
    report = simulation_report(
        args.impl, selected[args.impl], args.spec, selected[args.spec], settings.max_sigma, settings, args.bisim
    )
    print_report(report)
    write_traces(report, args.trace_out)
    return report.exit_code
