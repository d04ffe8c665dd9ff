"""
Tests for the protocol encodings, the registry and the replay attacks.
"""

from pathlib import Path

import pytest

from atcws.errors import AtcwsError, UnknownProtocolError
from atcws.lts import explore, parse_trace, run_trace
from atcws.messages import Atom
from atcws.models import Verdict
from atcws.protocols import (
    ProtocolInstance,
    abstraction_gaps,
    attacked_by_script,
    build,
    entry,
    label_gaps,
    list_protocols,
    replay_attack,
    scripted_attacker,
    system_gaps,
)
from atcws.protocols.common import tick_defs
from atcws.protocols.mutesla import nonce, reply
from atcws.syntax import Bang, Call, Network, Node, Sleep, check_well_formed, is_well_timed_syntax
from atcws.tgndc import KnowledgeSequence, check_stability


def test_registry_lists_every_protocol():
    """Test the registry is sorted and complete."""
    assert list_protocols() == ["leap", "lisp", "mutesla-auth", "mutesla-boot"]


def test_unknown_protocol_and_variant():
    """Test unknown names and variants raise with the known choices."""
    with pytest.raises(UnknownProtocolError):
        build("tinysec")
    with pytest.raises(UnknownProtocolError) as excinfo:
        build("lisp", "agreement")
    assert "integrity" in excinfo.value.detail


def test_parameters_are_checked():
    """Test unknown and out-of-range size parameters are refused."""
    with pytest.raises(AtcwsError):
        build("leap", n=0)
    with pytest.raises(AtcwsError):
        build("leap", h=2)
    with pytest.raises(AtcwsError):
        build("mutesla-boot", n=1000)


def test_instance_names_the_property_it_checks(boot_agreement: ProtocolInstance):
    """Test the checked property is a plain field next to the derived views of the instance."""
    assert boot_agreement.checked_property == "agreement"
    assert isinstance(ProtocolInstance.observed, property)
    assert boot_agreement.observed == boot_agreement.wiring.observed
    assert set(boot_agreement.networks) >= {"system", "abstraction", "attacked"}


def test_defaults_are_applied():
    """Test the default sizes reach the instance."""
    assert build("lisp").params == {"n": 8, "s": 3}
    assert build("mutesla-auth").params == {"n": 8, "h": 2}


@pytest.mark.parametrize("name,variant", [
    ("mutesla-boot", "integrity"),
    ("mutesla-boot", "agreement"),
    ("mutesla-auth", "integrity"),
    ("leap", "integrity"),
    ("leap", "agreement"),
    ("lisp", "integrity"),
])
def test_encodings_are_well_formed_and_well_timed(name: str, variant: str):
    """Test the system and its abstraction pass both structural checks."""
    instance = build(name, variant)
    for m in (instance.system, instance.abstraction):
        assert check_well_formed(m, connectivity=False).ok
        assert is_well_timed_syntax(m)


@pytest.mark.parametrize("name,variant,gap", [
    ("mutesla-boot", "integrity", 2),
    ("mutesla-boot", "agreement", 2),
    ("mutesla-auth", "integrity", 4),
    ("leap", "integrity", 2),
    ("leap", "agreement", 2),
    ("lisp", "integrity", 2),
])
def test_abstraction_gaps(name: str, variant: str, gap: int):
    """Test the largest gap each abstraction allows over three rounds."""
    assert max(abstraction_gaps(build(name, variant), rounds=3)) == gap


def test_lisp_abstraction_accepts_a_key_two_slots_after_it_is_served():
    """Test every served key is authenticated exactly two slots later in the abstraction."""
    assert abstraction_gaps(build("lisp"), rounds=3) == {2}
    assert abstraction_gaps(build("lisp", s=2), rounds=4) == {2}


def test_label_gaps_stop_at_the_explored_sigma_layers():
    """Test a lone broadcast followed by idle ticking yields no gap instead of counting forever."""
    once = Network((Node("m", Bang(Atom("ping"), Call("Tick"))),), tick_defs())
    assert label_gaps(explore(once, 5), Atom("ping"), Atom("pong")) == set()
    later = Network((Node("m", Bang(Atom("ping"), Sleep(Sleep(Bang(Atom("pong"), Call("Tick")))))),), tick_defs())
    assert label_gaps(explore(later, 5), Atom("ping"), Atom("pong")) == {2}


def test_boot_integrity_is_stable_for_its_knowledge(boot_integrity: ProtocolInstance):
    """Test no broadcast escapes the claimed knowledge, replays of earlier requests included."""
    report = check_stability(boot_integrity.system, boot_integrity.wiring, boot_integrity.knowledge, 6)
    assert report.verdict == Verdict.HOLDS


def test_boot_knowledge_needs_the_answers_to_replayed_requests(boot_integrity: ProtocolInstance):
    """Test bs answering an old request in a later interval escapes a sequence without those answers."""
    replayed = {reply(i, nonce(x)) for i in range(2, 12) for x in range(1, i)}
    deltas = [[t for t in delta if t not in replayed] for delta in boot_integrity.knowledge.deltas()]
    report = check_stability(
        boot_integrity.system, boot_integrity.wiring, KnowledgeSequence.from_deltas(deltas), 6,
    )
    assert report.verdict == Verdict.FAILS
    assert any(v.endswith(" from bs") for v in report.violations)


@pytest.mark.parametrize("name,trace_file", [
    ("mutesla-boot", "mutesla-boot-agreement.trace"),
    ("leap", "leap-agreement.trace"),
    ("lisp", "lisp-integrity.trace"),
])
def test_golden_traces_match_files(corpus_dir: Path, name: str, trace_file: str):
    """Test the bundled trace files are the recorded attack traces."""
    instance = build(name, entry(name).attack_variant)
    assert parse_trace((corpus_dir / "traces" / trace_file).read_text()) == instance.expected


def test_golden_trace_needs_the_attackers(boot_agreement: ProtocolInstance):
    """Test the attack trace runs only with the scripted replayers present."""
    assert run_trace(attacked_by_script(boot_agreement), boot_agreement.expected)
    assert not run_trace(boot_agreement.abstraction, boot_agreement.expected)


def test_scripted_attacker_shape():
    """Test the two replayers listen to their peers and to each other."""
    attackers = scripted_attacker("leap")
    assert attackers.node("a").neighbors == frozenset({"m", "b"})
    assert attackers.node("b").neighbors == frozenset({"r", "a"})
    with pytest.raises(UnknownProtocolError):
        scripted_attacker("tinysec")


@pytest.mark.parametrize("name,evidence", [
    ("mutesla-boot", "agreement gap 4 > 2"),
    ("leap", "agreement gap 4 > 2"),
    ("lisp", "integrity gap 3 > 2"),
])
def test_replay_attacks_break_the_bound(name: str, evidence: str):
    """Test each replay stretches the accepted gap past the abstraction's bound."""
    report = replay_attack(name)
    assert report.verdict == Verdict.FAILS
    assert report.evidence[0] == evidence
    assert report.traces["attack"]


def test_lisp_report_notes_the_shorter_trace():
    """Test the LiSP attack report carries its note about the trace length."""
    report = replay_attack("lisp")
    assert any("three" in note for note in report.notes)


def test_receiver_authenticates_without_attackers():
    """Test a receiver announces each packet exactly when its key arrives."""
    instance = build("mutesla-auth", n=3, h=1)
    assert system_gaps(instance, 10, rounds=1) == {instance.claimed_gap}
