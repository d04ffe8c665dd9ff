"""
trace: replay a trace file on a network.
"""

import argparse
from pathlib import Path

from ..errors import ResolutionError
from ..lts import parse_trace, run_trace, sigma_count
from ..models import CheckReport, Settings, Verdict
from .common import add_source_arguments, load_source, print_report, select_networks

NAME = "trace"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(NAME, parents=parents, help="Replay a trace file on a network")
    parser.add_argument("trace_file", type=Path, help="Trace file, one label per line")
    add_source_arguments(parser)
    parser.add_argument("--network", help="Network to run; defaults to the only one, or system")
    parser.add_argument("--expect-refused", action="store_true",
                        help="Succeed when the network cannot run the trace")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """
    Returns:
        0 when the outcome is the expected one, 1 otherwise.

    Raises:
        ResolutionError: when the trace file cannot be read or no network is named.
    """
    try:
        text = args.trace_file.read_text()
    except OSError as exc:
        raise ResolutionError(f"cannot read {args.trace_file}: {exc.strerror}")
    t = parse_trace(text)
    model = load_source(args, settings)
    name = args.network
    if name is None:
        if args.protocol:
            name = "system"
        elif len(model.networks) == 1:
            name = next(iter(model.networks))
        else:
            raise ResolutionError("the model has several networks; pick one with --network")
    m = select_networks(model, [name])[name]
    result = run_trace(m, t, settings.tau_bound)
    runs = bool(result)
    evidence = [f"labels: {len(t)}", f"sigmas: {sigma_count(t)}"]
    evidence.append(f"runs, {len(result)} end states" if runs else "refused")
    if runs == args.expect_refused:
        verdict = Verdict.INCONCLUSIVE if result.truncated and not runs else Verdict.FAILS
    else:
        verdict = Verdict.HOLDS
    report = CheckReport(
        check="trace",
        subject=f"{args.trace_file.name} on {name}",
        verdict=verdict,
        evidence=evidence,
        notes=["tau-closure truncated"] if result.truncated else [],
    )
    print_report(report)
    return report.exit_code
