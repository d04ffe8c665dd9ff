"""
Tests for processes, networks, well-formedness and well-timedness.
"""

import pytest

from atcws.errors import StructuralError
from atcws.messages import Atom, Var, pair
from atcws.models import Verdict
from atcws.syntax import (
    NIL,
    Bang,
    Call,
    Deduce,
    Network,
    Node,
    ProcessDef,
    RcvTimeout,
    Sleep,
    SumTimeout,
    check_well_formed,
    free_vars,
    is_well_timed_syntax,
    msg_of,
    struct_congruent,
    substitute,
    topology,
    unfold,
    well_timed_violations,
)

PING = Atom("ping")


def test_node_cannot_neighbor_itself():
    """Test that a node listing itself is rejected."""
    with pytest.raises(StructuralError):
        Node("m", NIL, frozenset({"m"}))


def test_choice_needs_a_branch():
    """Test an empty internal choice is rejected."""
    with pytest.raises(StructuralError):
        SumTimeout((), NIL)


def test_free_vars_respects_binders():
    """Test receive and deduction binders bind in their bodies only."""
    proc = RcvTimeout("x", Bang(pair(Var("x"), Var("y")), NIL), Bang(Var("x"), NIL))
    assert free_vars(proc) == frozenset({"x", "y"})
    let = Deduce((Var("z"),), "fst", "w", Bang(Var("w"), NIL), NIL)
    assert free_vars(let) == frozenset({"z"})


def test_substitute_stops_at_shadowing_binder():
    """Test an inner receive of the same name shadows the substitution."""
    proc = Bang(Var("x"), RcvTimeout("x", Bang(Var("x"), NIL), NIL))
    result = substitute(proc, "x", PING)
    assert result.payload == PING
    assert result.cont.body.payload == Var("x")


def test_unfold_checks_arity():
    """Test unfolding substitutes arguments and rejects a wrong count."""
    defs = {"Say": ProcessDef("Say", ("v",), Bang(Var("v"), NIL))}
    assert unfold(Call("Say", (PING,)), defs) == Bang(PING, NIL)
    with pytest.raises(StructuralError):
        unfold(Call("Say", ()), defs)
    with pytest.raises(StructuralError):
        unfold(Call("Missing", ()), defs)


def test_single_node_is_well_formed():
    """Test connectivity is trivial for one node."""
    report = check_well_formed(Network((Node("m", NIL),)))
    assert report.verdict == Verdict.HOLDS


def test_duplicate_names_are_reported():
    """Test repeated node names violate well-formedness."""
    report = check_well_formed(Network((Node("m", NIL), Node("m", NIL))))
    assert report.verdict == Verdict.FAILS
    assert any("duplicate" in line for line in report.violations)


def test_asymmetric_neighbors_are_reported():
    """Test one-sided neighboring names both nodes."""
    m = Network((Node("p", NIL, frozenset({"q"})), Node("q", NIL)))
    report = check_well_formed(m)
    assert report.verdict == Verdict.FAILS
    assert any("asymmetric" in line and "p" in line and "q" in line for line in report.violations)


def test_disconnected_network_is_reported():
    """Test two nodes without a path fail the connectivity clause."""
    m = Network((Node("p", NIL), Node("q", NIL)))
    assert check_well_formed(m).verdict == Verdict.FAILS
    assert check_well_formed(m, connectivity=False).verdict == Verdict.HOLDS


def test_environment_neighbors_are_exempt():
    """Test observer and attacker names outside the network need no symmetry."""
    m = Network((Node("p", NIL, frozenset({"q", "obs"})), Node("q", NIL, frozenset({"p", "a"}))))
    report = check_well_formed(m)
    assert report.verdict == Verdict.HOLDS
    assert any("a, obs" in note for note in report.notes)


def test_sleep_guards_recursion(tick_network: Network):
    """Test sigma-guarded recursion is well-timed."""
    assert is_well_timed_syntax(tick_network)


def test_unguarded_recursion_is_reported():
    """Test a definition re-entering itself through a broadcast alone is flagged."""
    defs = {
        "Loop": ProcessDef("Loop", (), Bang(PING, Call("Loop"))),
        "Ok": ProcessDef("Ok", (), RcvTimeout("x", Sleep(Call("Ok")), Call("Ok"))),
    }
    m = Network((Node("m", Call("Ok")),), defs)
    assert well_timed_violations(m) == ["Loop recurses without a time guard"]


def test_receive_body_is_not_a_guard():
    """Test recursion inside a receive body without sleep is unguarded."""
    defs = {"R": ProcessDef("R", (), RcvTimeout("x", Call("R"), Sleep(Call("R"))))}
    assert not is_well_timed_syntax(Network((Node("m", Call("R")),), defs))


def test_msg_of_unwinds_definitions(ping_network: Network):
    """Test messages are collected through called definitions."""
    assert PING in msg_of(ping_network)


def test_struct_congruence_ignores_order_and_unfolding():
    """Test node order, choice order and head calls do not matter."""
    defs = {"P": ProcessDef("P", (), Bang(PING, NIL))}
    left = Network((
        Node("a", Call("P"), frozenset({"b"})),
        Node("b", SumTimeout((Sleep(NIL), NIL), NIL), frozenset({"a"})),
    ), defs)
    right = Network((
        Node("b", SumTimeout((NIL, Sleep(NIL)), NIL), frozenset({"a"})),
        Node("a", Bang(PING, NIL), frozenset({"b"})),
    ), defs)
    assert struct_congruent(left, right)
    assert not struct_congruent(left, right.with_nodes([Node("a", NIL, frozenset({"b"})), right.nodes[0]]))


def test_compose_rejects_conflicting_definitions():
    """Test composition refuses two different bodies for one name."""
    left = Network((Node("a", NIL),), {"P": ProcessDef("P", (), NIL)})
    right = Network((Node("b", NIL),), {"P": ProcessDef("P", (), Sleep(NIL))})
    with pytest.raises(StructuralError):
        left.compose(right)


def test_topology_separates_environment(ping_network: Network):
    """Test listed neighbors outside the network form the environment."""
    topo = topology(ping_network)
    assert topo.nds == frozenset({"p", "q"})
    assert topo.env == frozenset({"obs"})
    assert topo.neighbors("q") == frozenset({"p", "obs"})
    with pytest.raises(StructuralError):
        topo.neighbors("obs")
