"""
Tests for the transition semantics, traces, exploration and the timing laws.
"""

from pathlib import Path

import pytest

from atcws.errors import DslSyntaxError, StructuralError
from atcws.lts import (
    SIGMA,
    TAU,
    Bcast,
    Input,
    ObsBcast,
    Semantics,
    Sigma,
    Trace,
    explore,
    format_trace,
    observe,
    parse_trace,
    run_trace,
    sigma_gap,
    step,
    time_property_violations,
)
from atcws.messages import Atom, Var, pair
from atcws.models import Verdict
from atcws.protocols.common import network, tick_defs
from atcws.sampling import random_network, time_property_suite
from atcws.syntax import (
    NIL,
    Bang,
    Call,
    Network,
    Node,
    ProcessDef,
    RcvTimeout,
    Sleep,
    is_well_timed_syntax,
    structural_violations,
)

PING = Atom("ping")
OBS = frozenset({"obs"})


def test_empty_network_only_idles():
    """Test the empty network has one state with a sigma loop."""
    graph = explore(Network(()), 3)
    assert len(graph.states) == 1
    assert graph.edges == [(0, SIGMA, 0)]


def test_tick_is_a_single_state(tick_network: Network):
    """Test Tick = sigma.Tick explores to one canonical state."""
    graph = explore(tick_network, 3)
    assert len(graph.states) == 1
    assert [label for _, label, _ in graph.edges] == [SIGMA]


def test_pending_broadcast_blocks_time(ping_network: Network):
    """Test maximal progress: no sigma while p is about to broadcast."""
    labels = [label for label, _ in step(ping_network)]
    assert labels
    assert not any(isinstance(label, Sigma) for label in labels)


def test_broadcast_may_be_missed(ping_network: Network):
    """Test every in-range receiver may receive or miss the broadcast."""
    successors = [m for label, m in step(ping_network) if isinstance(label, Bcast)]
    assert len(successors) == 2
    q_procs = {m.node("q").proc for m in successors}
    assert len(q_procs) == 2


def test_internal_broadcast_is_hidden(ping_network: Network):
    """Test a broadcast nobody outside hears is observed as tau."""
    label = Bcast("p", PING, frozenset())
    assert observe(label) == TAU
    assert observe(Bcast("q", PING, OBS)) == ObsBcast(PING, OBS)


def test_observable_broadcast_needs_receivers():
    """Test an anonymous broadcast without receivers is rejected."""
    with pytest.raises(StructuralError):
        ObsBcast(PING, frozenset())


def test_inputs_only_from_outside_senders(ping_network: Network):
    """Test input candidates are offered only for senders outside the network."""
    semantics = Semantics(ping_network, inputs={"obs": [PING], "p": [PING]})
    labels = {label for label, _ in semantics.transitions(semantics.initial())}
    assert Input("obs", PING) in labels
    assert Input("p", PING) not in labels


def test_no_inputs_by_default(ping_network: Network):
    """Test the closed-system default offers no input labels."""
    semantics = Semantics(ping_network)
    assert not any(isinstance(label, Input) for label, _ in semantics.transitions(semantics.initial()))


def test_composition_idles_only_if_both_idle(tick_network: Network):
    """Test a sigma step of a composition needs a sigma step of each side."""
    busy = network(Node("p", Bang(PING, NIL)), defs={})
    joint = tick_network.compose(busy)
    assert not any(isinstance(label, Sigma) for label, _ in step(joint))
    idle = network(Node("p", Sleep(NIL)), defs={})
    assert any(isinstance(label, Sigma) for label, _ in step(tick_network.compose(idle)))


def test_echo_trace_runs(ping_network: Network):
    """Test the echoed ping is observable one slot after it is sent."""
    heard = Trace((TAU, SIGMA, ObsBcast(PING, OBS)))
    assert run_trace(ping_network, heard)
    early = Trace((ObsBcast(PING, OBS),))
    assert not run_trace(ping_network, early)


def test_sigma_gap_counts_between_payloads():
    """Test the gap counts sigmas between the two broadcasts."""
    t = Trace((ObsBcast(PING, OBS), SIGMA, TAU, SIGMA, ObsBcast(pair(PING, PING), OBS)))
    assert sigma_gap(t, PING, pair(PING, PING)) == 2
    assert sigma_gap(t, pair(PING, PING), PING) is None


def test_trace_text_round_trip(corpus_dir: Path):
    """Test golden trace files re-emit byte for byte."""
    for path in sorted((corpus_dir / "traces").glob("*.trace")):
        text = path.read_text()
        assert format_trace(parse_trace(text)) == text


def test_trace_parse_error_has_line():
    """Test a bad label reports its line number."""
    with pytest.raises(DslSyntaxError) as excinfo:
        parse_trace("sigma\n\nbogus label\n")
    assert excinfo.value.line == 3


def test_trace_skips_comments():
    """Test blank lines and comments are ignored."""
    assert parse_trace("# start\nsigma\n\ntau\n") == Trace((SIGMA, TAU))


def test_state_budget_marks_graph_incomplete(ping_network: Network):
    """Test a tiny state budget leaves the graph flagged incomplete."""
    graph = explore(ping_network, 6, state_budget=1)
    assert not graph.complete


def test_dot_export_names_every_state(ping_network: Network):
    """Test the Graphviz rendering lists states and edges."""
    graph = explore(ping_network, 2)
    dot = graph.to_dot()
    assert dot.startswith("digraph lts {")
    assert dot.count("->") == len(graph.edges)


def test_unguarded_recursion_is_caught_at_runtime():
    """Test settling a call loop without a head form raises."""
    defs = {"Loop": ProcessDef("Loop", (), Call("Loop"))}
    m = Network((Node("m", Call("Loop")),), defs)
    with pytest.raises(StructuralError):
        step(m)


def test_time_laws_hold_on_ping(ping_network: Network):
    """Test the timing laws on a small hand-written network."""
    violations, complete = time_property_violations(ping_network, 4)
    assert complete
    assert violations == []


def test_long_instantaneous_run_is_reported():
    """Test a burst longer than the step budget is flagged."""
    burst = Bang(PING, Bang(PING, Bang(PING, Bang(PING, Sleep(Call("Tick"))))))
    m = Network((Node("m", burst, OBS),), tick_defs())
    violations, _ = time_property_violations(m, 2, step_budget=3)
    assert any("instantaneous" in line for line in violations)
    violations, _ = time_property_violations(m, 2, step_budget=4)
    assert violations == []


def test_receiver_keeps_time_determinism():
    """Test a receive with timeout has exactly one sigma successor."""
    defs = {"R": ProcessDef("R", (), RcvTimeout("x", Sleep(Bang(Var("x"), NIL)), Call("R")))}
    m = Network((Node("m", Call("R"), OBS),), defs)
    semantics = Semantics(m)
    sigmas = [s for label, s in semantics.transitions(semantics.initial()) if isinstance(label, Sigma)]
    assert len(sigmas) == 1


class _EagerClock(Semantics):
    """Lets time pass in every state, pending broadcasts or not."""

    def transitions(self, state):
        moves = list(super().transitions(state))
        if not any(isinstance(label, Sigma) for label, _ in moves):
            moves.append((SIGMA, state))
        return moves


def test_time_laws_are_read_off_the_transitions():
    """Test a semantics that lets time pass over a pending broadcast is caught."""
    m = Network((Node("m", Bang(PING, Call("Tick")), OBS),), tick_defs())
    violations, _ = time_property_violations(m, 2)
    assert violations == []
    violations, _ = time_property_violations(m, 2, semantics=_EagerClock(m))
    assert "state 0: sigma while a broadcast is pending" in violations


def test_random_networks_are_well_formed_and_well_timed(rng):
    """Test the generator only yields networks the checks accept."""
    for _ in range(50):
        m = random_network(rng)
        assert structural_violations(m) == []
        assert is_well_timed_syntax(m)


def test_time_laws_hold_on_random_networks():
    """Test the timing laws on 500 random networks of up to four nodes."""
    report = time_property_suite(count=500, seed=7)
    assert report.violations == []
    assert report.verdict in (Verdict.HOLDS, Verdict.INCONCLUSIVE)
