"""
tgndc: run the queries of a query file, or the criterion on a bundled protocol.
"""

import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List

from ..dsl import Query, SourceModel
from ..models import CheckReport, Settings
from ..protocols import build, replay_attack
from ..tgndc import TgndcPart, TgndcQuery, check_tgndc, check_tgndc_compositional, tgndc_report
from .common import (
    add_source_arguments,
    bounds_for,
    exit_code,
    load_source,
    print_reports,
    protocol_params,
    write_traces,
)
from .explore import exploration_report
from .sim import simulation_report

logger = logging.getLogger(__name__)

NAME = "tgndc"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(NAME, parents=parents, help="Run the queries of a query file")
    add_source_arguments(parser)
    parser.add_argument("--trace-out", type=Path, help="Write the first counterexample trace here")
    parser.set_defaults(handler=run)


def run_query(model: SourceModel, query: Query, settings: Settings) -> CheckReport:
    """
    Run one query of a source model.

    Raises:
        PreconditionError: when the system is not stable for the knowledge sequence.
    """
    bounds = bounds_for(settings, query)
    logger.info("line %d: %s query", query.line, query.kind)
    if query.kind == "sim":
        return simulation_report(
            query.subject, model.networks[query.subject], query.spec, model.networks[query.spec],
            bounds.max_sigma, settings,
        )
    if query.kind == "explore":
        return exploration_report(
            query.subject, model.networks[query.subject], bounds.max_sigma, settings.state_budget
        )
    if query.kind == "attack":
        return replay_attack(
            query.subject, max_sigma=bounds.max_sigma, tau_bound=settings.tau_bound,
            state_budget=settings.state_budget,
        )
    phi = model.phis[query.phi]
    parts = [
        TgndcPart(part.system, model.networks[part.system], model.networks[part.spec],
                  frozenset(part.observe), part.attackers)
        for part in query.parts
    ]
    if len(parts) == 1:
        part = parts[0]
        q = TgndcQuery(part.network, part.spec, part.wiring(), phi, bounds, part.name)
        result = check_tgndc(q, settings.tau_bound, settings.state_budget, settings.max_candidates)
        return tgndc_report(q, result)
    return check_tgndc_compositional(
        parts, phi, bounds, settings.tau_bound, settings.state_budget, settings.max_candidates, settings.jobs
    )


def protocol_reports(args: argparse.Namespace, settings: Settings) -> List[CheckReport]:
    """The criterion on a bundled protocol: per part when it has parts, whole otherwise."""
    instance = build(args.protocol, args.variant, **protocol_params(args.protocol, args, settings))
    bounds = bounds_for(settings)
    if instance.parts:
        return [check_tgndc_compositional(
            instance.parts, instance.knowledge, bounds, settings.tau_bound, settings.state_budget,
            settings.max_candidates, settings.jobs,
        )]
    q = instance.query(bounds)
    result = check_tgndc(q, settings.tau_bound, settings.state_budget, settings.max_candidates)
    return [tgndc_report(q, result)]


def run(args: argparse.Namespace, settings: Settings) -> int:
    """
    Returns:
        The worst exit code over all queries.
    """
    if args.protocol:
        reports = protocol_reports(args, settings)
    else:
        model = load_source(args, settings)
        if not model.queries:
            logger.warning("%s declares no queries", args.source)
        if settings.jobs > 1 and len(model.queries) > 1:
            with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
                reports = list(pool.map(lambda query: run_query(model, query, settings), model.queries))
        else:
            reports = [run_query(model, query, settings) for query in model.queries]
    print_reports(reports)
    for report in reports:
        if report.traces:
            write_traces(report, args.trace_out)
            break
    return exit_code(reports)
