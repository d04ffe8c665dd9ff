"""
Tests for knowledge sequences, attacker wiring, stability and the top-attacker criterion.
"""

import pytest

from atcws.errors import PreconditionError, StructuralError, WiringError
from atcws.messages import Atom, Knowledge, Var, mac, pair, serialize
from atcws.models import Bounds, Verdict
from atcws.protocols import ProtocolInstance, build
from atcws.protocols.common import network, tick_defs
from atcws.syntax import NIL, Bang, Call, Match, Network, Node, ProcessDef, RcvTimeout, Sleep
from atcws.tgndc import (
    AttackerWiring,
    KnowledgeSequence,
    TgndcPart,
    TgndcQuery,
    check_stability,
    check_tgndc,
    check_tgndc_compositional,
    derive_knowledge_sequence,
    harvest_shapes,
    slot_candidates,
    tgndc_report,
    wire_observed,
)

PING = Atom("ping")
SECRET = Atom("secret")
JUNK = Atom("junk")
OK = Atom("ok")
PASSWORD = Atom("a")
SMALL = Bounds(max_sigma=2, deduction_depth=2, candidate_depth=1)


def _gatekeeper() -> Network:
    """m reports ok to the observer only after hearing the secret."""
    defs = {
        "Listen": ProcessDef("Listen", (), RcvTimeout(
            "x",
            Match(Var("x"), SECRET, Bang(pair(OK, Var("x")), Sleep(Call("Tick"))), Sleep(Call("Listen"))),
            Call("Listen"),
        )),
    }
    return network(Node("m", Call("Listen")), defs=defs)


def _quiet_spec() -> Network:
    return Network((Node("m", Call("Tick"), frozenset({"obs"})),), tick_defs())


def _gate_query(phi: KnowledgeSequence) -> TgndcQuery:
    wiring = AttackerWiring(("m",), ("a",), frozenset({"m"}))
    return TgndcQuery(_gatekeeper(), _quiet_spec(), wiring, phi, SMALL, "gatekeeper")


def test_knowledge_sequence_accumulates():
    """Test slots are cumulative and slots past the end repeat the last one."""
    phi = KnowledgeSequence.from_deltas([[PING], [], [SECRET]])
    assert PING in phi.at(2)
    assert SECRET not in phi.at(1)
    assert phi.at(9) == phi.at(2)
    assert phi.deltas() == [[PING], [], [SECRET]]
    assert phi.truncated().slots == (phi.at(0),)


def test_knowledge_sequence_must_grow():
    """Test a shrinking or empty sequence is rejected."""
    with pytest.raises(StructuralError):
        KnowledgeSequence((Knowledge.of([PING, SECRET]), Knowledge.of([PING])))
    with pytest.raises(StructuralError):
        KnowledgeSequence(())


def test_wiring_rules():
    """Test attackers pair one to one with protocol nodes and never take the observer's name."""
    with pytest.raises(WiringError):
        AttackerWiring(("m", "r"), ("a",))
    with pytest.raises(WiringError):
        AttackerWiring(("m",), ("m",))
    with pytest.raises(WiringError):
        AttackerWiring(("m",), ("obs",))
    with pytest.raises(WiringError):
        AttackerWiring(("m",), ("a",), frozenset({"r"}))


def test_wire_observed_rewrites_neighbors(ping_network: Network):
    """Test each node gets its attacker and observed nodes get the observer."""
    wired = wire_observed(ping_network, AttackerWiring(("p", "q"), ("a", "b"), frozenset({"p"})))
    assert wired.node("p").neighbors == frozenset({"q", "a", "obs"})
    assert wired.node("q").neighbors == frozenset({"p", "b"})


def test_wire_observed_needs_matching_nodes(ping_network: Network):
    """Test a wiring for other nodes than the network has is refused."""
    with pytest.raises(WiringError):
        wire_observed(ping_network, AttackerWiring(("p",), ("a",)))


def test_spec_environment_is_the_observer_only():
    """Test a spec listening to anything but the observer is refused."""
    spec = Network((Node("m", Call("Tick"), frozenset({"a"})),), tick_defs())
    with pytest.raises(WiringError):
        TgndcQuery(_gatekeeper(), spec, AttackerWiring(("m",), ("a",)), KnowledgeSequence.from_deltas([[]]), SMALL)


def test_recorded_knowledge_makes_system_stable(ping_network: Network):
    """Test the recorded sequence covers every broadcast, and an empty one does not."""
    wiring = AttackerWiring(("p", "q"), ("a", "b"))
    phi = derive_knowledge_sequence(ping_network, wiring, 2)
    assert PING in phi.at(0)
    assert check_stability(ping_network, wiring, phi, 2).verdict == Verdict.HOLDS
    empty = KnowledgeSequence.from_deltas([[]])
    report = check_stability(ping_network, wiring, empty, 2)
    assert report.verdict == Verdict.FAILS
    assert "slot 0: ping from p" in report.violations


def _password_door() -> Network:
    """m gives away the secret to whoever sends the password a, and otherwise sleeps."""
    defs = tick_defs()
    defs["Door"] = ProcessDef("Door", (), RcvTimeout(
        "x",
        Match(Var("x"), PASSWORD, Bang(SECRET, Sleep(Call("Tick"))), Sleep(Call("Tick"))),
        Call("Tick"),
    ))
    return Network((Node("m", Call("Door")),), defs)


def test_stability_counts_what_the_attacker_draws_out():
    """Test a broadcast triggered only by attacker input is a stability violation."""
    wiring = AttackerWiring(("m",), ("a",))
    report = check_stability(_password_door(), wiring, KnowledgeSequence.from_deltas([[PASSWORD]]), 2)
    assert report.verdict == Verdict.FAILS
    assert report.violations == ["slot 0: secret from m"]
    quiet = check_stability(_password_door(), wiring, KnowledgeSequence.from_deltas([[JUNK]]), 2)
    assert quiet.verdict == Verdict.HOLDS


def test_harvest_keeps_the_most_specific_pattern():
    """Test the catch-all pattern of the else branch is dropped next to the tested value."""
    shapes = harvest_shapes(_gatekeeper(), 2)
    assert shapes[0] == frozenset({SECRET})


def test_slot_candidates_replay_accepted_messages():
    """Test known messages of the accepted form are offered with one rejected stand-in."""
    req, m, n1, n2, k = Atom("req"), Atom("m"), Atom("n1"), Atom("n2"), Atom("k")
    first, second = pair(req, pair(m, n1)), pair(req, pair(m, n2))
    phi = Knowledge.of([first, second, k])
    candidates = slot_candidates(phi, [pair(req, pair(Var("x0"), Var("x1")))])
    assert set(candidates) == {first, second, k}
    assert list(candidates) == sorted(candidates, key=serialize)


def test_slot_candidates_forge_unseen_patterns_once():
    """Test a pattern nothing known fits yields one composable instance."""
    phi = Knowledge.of([JUNK, PASSWORD])
    candidates = slot_candidates(phi, [mac(Var("x0"), Var("x1"))])
    assert set(candidates) == {PASSWORD, mac(PASSWORD, PASSWORD)}


def test_criterion_holds_when_secret_is_unknown():
    """Test the attacker cannot make the gatekeeper speak without the secret."""
    q = _gate_query(KnowledgeSequence.from_deltas([[JUNK]]))
    result = check_tgndc(q)
    assert result.holds
    report = tgndc_report(q, result)
    assert report.evidence[0].startswith("tGNDC holds")
    assert report.caveats


def test_criterion_fails_when_secret_leaks():
    """Test knowing the secret lets the attacker trigger an unmatched report."""
    q = _gate_query(KnowledgeSequence.from_deltas([[JUNK, SECRET, OK]]))
    result = check_tgndc(q)
    assert result.verdict == Verdict.FAILS
    report = tgndc_report(q, result)
    assert report.traces["attack"][-1] == "out pair(ok,secret) > {obs}"


def test_unstable_system_is_a_precondition_failure(ping_network: Network):
    """Test the criterion refuses a system whose broadcasts escape the sequence."""
    spec = Network((Node("p", Call("Tick")), Node("q", Call("Tick"))), tick_defs())
    wiring = AttackerWiring(("p", "q"), ("a", "b"))
    q = TgndcQuery(ping_network, spec, wiring, KnowledgeSequence.from_deltas([[]]), SMALL)
    with pytest.raises(PreconditionError):
        check_tgndc(q)


def test_parts_need_disjoint_attackers():
    """Test two parts sharing an attacker name are refused."""
    part = TgndcPart("g", _gatekeeper(), _quiet_spec(), frozenset({"m"}), ("a",))
    other = TgndcPart("h", Network((Node("r", Call("Tick")),), tick_defs()),
                      Network((Node("r", Call("Tick")),), tick_defs()), frozenset(), ("a",))
    with pytest.raises(WiringError):
        check_tgndc_compositional([part, other], KnowledgeSequence.from_deltas([[JUNK]]), SMALL)


@pytest.mark.parametrize("name,variant,params", [
    ("mutesla-boot", "integrity", {"n": 8}),
    ("mutesla-auth", "integrity", {"n": 8, "h": 2}),
    ("leap", "integrity", {"n": 8}),
])
def test_protocol_parts_hold(name: str, variant: str, params: dict):
    """Test every part of the integrity encodings meets its own spec."""
    instance: ProtocolInstance = build(name, variant, **params)
    bounds = Bounds(max_sigma=8, deduction_depth=2, candidate_depth=2)
    report = check_tgndc_compositional(instance.parts, instance.knowledge, bounds)
    assert report.verdict == Verdict.HOLDS, report.render()
    assert len(report.evidence) == len(instance.parts) + 1
