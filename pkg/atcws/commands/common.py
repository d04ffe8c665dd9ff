"""
Helpers shared by the subcommands: model sources, bounds and output.
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from ..dsl import Query, SourceModel, instance_model, load
from ..errors import AtcwsError, ResolutionError
from ..models import Bounds, CheckReport, Settings, combine_verdicts
from ..protocols import build, entry
from ..syntax import Network

logger = logging.getLogger(__name__)

# Settings field feeding each protocol size parameter
SIZE_SETTINGS = {"n": "chain_length", "s": "buffer_size", "h": "receivers"}


def add_size_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None, help="Key chain length")
    parser.add_argument("--s", type=int, default=None, help="LiSP key buffer size")
    parser.add_argument("--h", type=int, default=None, help="Receivers of the authenticated broadcast")


def add_source_arguments(parser: argparse.ArgumentParser) -> None:
    """A model file, or a bundled protocol instance."""
    parser.add_argument("source", nargs="?", type=Path, help="Model file (.atcws or .q)")
    parser.add_argument("--protocol", help="Use a bundled protocol instead of a model file")
    parser.add_argument("--variant", help="Protocol variant")
    add_size_arguments(parser)


def protocol_params(name: str, args: argparse.Namespace, settings: Settings) -> Dict[str, int]:
    """
    Size parameters for a protocol: flags first, then settings.

    Only the parameters the protocol declares are returned.
    """
    params = {}
    for key, _ in entry(name).defaults:
        value = getattr(args, key, None)
        if value is None:
            value = getattr(settings, SIZE_SETTINGS[key])
        params[key] = value
    return params


def load_source(args: argparse.Namespace, settings: Settings) -> SourceModel:
    """
    The model named on the command line.

    Raises:
        AtcwsError: when neither a file nor --protocol is given.
    """
    if args.protocol:
        instance = build(args.protocol, args.variant, **protocol_params(args.protocol, args, settings))
        return instance_model(instance)
    if args.source is None:
        raise AtcwsError("give a model file or --protocol")
    return load(args.source)


def select_networks(model: SourceModel, names: Optional[Sequence[str]]) -> Dict[str, Network]:
    """
    The named networks, or all of them.

    Raises:
        ResolutionError: for a name the model does not declare.
    """
    if not names:
        return dict(model.networks)
    selected = {}
    for name in names:
        if name not in model.networks:
            raise ResolutionError(f"unknown network {name}; known: {', '.join(model.networks)}")
        selected[name] = model.networks[name]
    return selected


def bounds_for(settings: Settings, query: Optional[Query] = None) -> Bounds:
    """Bounds from settings, narrowed by the limits a query spells out."""
    bounds = Bounds(
        max_sigma=settings.max_sigma,
        deduction_depth=settings.deduction_depth,
        candidate_depth=settings.candidate_depth,
    )
    if query is None:
        return bounds
    return Bounds(
        max_sigma=query.bound if query.bound is not None else bounds.max_sigma,
        deduction_depth=query.depth if query.depth is not None else bounds.deduction_depth,
        candidate_depth=query.candidates if query.candidates is not None else bounds.candidate_depth,
    )


def print_report(report: CheckReport) -> None:
    print(report.render(), end="")


def print_reports(reports: Sequence[CheckReport]) -> None:
    """Reports separated by one blank line."""
    print("\n".join(report.render() for report in reports), end="")


def write_traces(report: CheckReport, path: Optional[Path]) -> None:
    """Write the report's first trace as a trace file, when asked to; replayable traces come first."""
    if path is None or not report.traces:
        return
    name = min(report.traces, key=lambda key: (key.endswith("-branching"), key))
    Path(path).write_text("".join(f"{label}\n" for label in report.traces[name]))
    logger.info("wrote trace %s to %s", name, path)


def exit_code(reports: List[CheckReport]) -> int:
    """Worst exit code of a batch: fails beats inconclusive beats holds."""
    return combine_verdicts([report.verdict for report in reports]).exit_code
