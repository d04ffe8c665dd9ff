"""
explore: bounded state-space exploration with optional DOT export.
"""

import argparse
import logging
from pathlib import Path
from typing import Optional

from ..lts import explore
from ..models import Bounds, CheckReport, Settings, Verdict
from ..syntax import Network
from .common import add_source_arguments, exit_code, load_source, print_reports, select_networks

logger = logging.getLogger(__name__)

NAME = "explore"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(NAME, parents=parents, help="Explore the transition graph of a network")
    add_source_arguments(parser)
    parser.add_argument("--network", action="append", help="Network to explore; repeatable")
    parser.add_argument("--dot", type=Path, help="Write the graph in Graphviz format")
    parser.set_defaults(handler=run)


def exploration_report(
    name: str,
    network: Network,
    max_sigma: int,
    state_budget: int,
    dot: Optional[Path] = None,
) -> CheckReport:
    graph = explore(network, max_sigma, state_budget=state_budget)
    if dot is not None:
        dot.write_text(graph.to_dot())
        logger.info("wrote %s", dot)
    return CheckReport(
        check="explore",
        subject=name,
        verdict=Verdict.HOLDS if graph.complete else Verdict.INCONCLUSIVE,
        bounds=Bounds(max_sigma=max_sigma),
        evidence=[f"states: {len(graph.states)}", f"edges: {len(graph.edges)}"],
        notes=[] if graph.complete else [f"state budget {state_budget} exceeded"],
    )


def run(args: argparse.Namespace, settings: Settings) -> int:
    """
    Returns:
        0 when every exploration completed, 2 when a budget cut one short.
    """
    model = load_source(args, settings)
    names = args.network or (["system"] if args.protocol else None)
    selected = select_networks(model, names)
    if args.dot is not None and len(selected) > 1:
        logger.warning("--dot with several networks keeps the last graph only")
    reports = [
        exploration_report(name, m, settings.max_sigma, settings.state_budget, args.dot)
        for name, m in selected.items()
    ]
    print_reports(reports)
    return exit_code(reports)
