"""
Tests for terms, normalization, inference rules and deducibility.
"""

import random
from itertools import product
from typing import FrozenSet, List, Set

import pytest

from atcws.errors import StructuralError
from atcws.messages import (
    App,
    Atom,
    ChainKey,
    Knowledge,
    Term,
    Var,
    apply_rule,
    dec,
    deducible,
    enc,
    f_power,
    hash_,
    mac,
    normalize,
    number,
    pair,
    serialize,
    subterms,
    synth_candidates,
    term_depth,
)

A, B, C = Atom("a"), Atom("b"), Atom("c")
K1, K2 = Atom("k1", "base-key"), Atom("k2", "base-key")


def test_serialize_has_no_spaces():
    """Test the canonical text form of a nested term."""
    assert serialize(pair(A, mac(K1, B))) == "pair(a,mac(k1,b))"
    assert serialize(ChainKey("c", 3)) == "kc_3"
    assert serialize(number(2)) == "2"


def test_app_rejects_wrong_arity():
    """Test that a constructor applied to the wrong number of arguments fails."""
    with pytest.raises(StructuralError):
        App("pair", (A,))


def test_normalize_steps_chain_keys_down():
    """Test that F maps k_{i+1} to k_i and stops at k_0."""
    assert normalize(f_power(ChainKey("c", 5), 2)) == ChainKey("c", 3)
    assert normalize(App("F", (ChainKey("c", 0),))) == App("F", (ChainKey("c", 0),))


def test_normalize_cancels_decryption():
    """Test dec(k, enc(k, m)) rewrites to m, and a wrong key does not."""
    assert normalize(dec(K1, enc(K1, A))) == A
    assert normalize(dec(K2, enc(K1, A))) == dec(K2, enc(K1, A))


def test_normalize_is_idempotent(rng: random.Random):
    """Test normalizing twice equals normalizing once on random terms."""
    for _ in range(200):
        term = _random_term(rng, 3, with_rewrites=True)
        once = normalize(term)
        assert normalize(once) == once


def test_projection_rules_fail_softly():
    """Test fst and snd return None on a non-pair instead of raising."""
    assert apply_rule("fst", [pair(A, B)]) == A
    assert apply_rule("snd", [pair(A, B)]) == B
    assert apply_rule("fst", [hash_(A)]) is None
    assert apply_rule("dec", [K2, enc(K1, A)]) is None


def test_rule_arity_and_open_premises_raise():
    """Test arity mismatches, unknown rules and open premises are structural errors."""
    with pytest.raises(StructuralError):
        apply_rule("pair", [A])
    with pytest.raises(StructuralError):
        apply_rule("xor", [A, B])
    with pytest.raises(StructuralError):
        apply_rule("fst", [Var("x")])


def test_deducible_splits_and_composes():
    """Test pair components and new constructions over known parts."""
    phi = Knowledge.of([pair(A, K1)])
    assert deducible(A, phi)
    assert deducible(mac(K1, A), phi)
    assert deducible(hash_(pair(K1, A)), phi)
    assert not deducible(B, phi)
    assert not deducible(mac(K2, A), phi)


def test_deducible_depth_limits_composition():
    """Test the depth argument bounds the constructor layers added to the known base."""
    phi = Knowledge.of([A, K1])
    nested = mac(K1, pair(A, hash_(A)))
    assert deducible(nested, phi)
    assert deducible(nested, phi, 3)
    assert not deducible(nested, phi, 2)
    assert deducible(pair(A, K1), phi, 1)
    assert not deducible(pair(A, K1), phi, 0)
    assert deducible(A, phi, 0)


def test_deducible_opens_ciphertext_only_with_key():
    """Test a ciphertext yields its body exactly when the key is known."""
    sealed = enc(K1, B)
    assert not deducible(B, Knowledge.of([sealed]))
    assert deducible(B, Knowledge.of([sealed, K1]))


def test_deducible_derives_lower_chain_keys():
    """Test that a disclosed chain key gives every earlier key but no later one."""
    phi = Knowledge.of([ChainKey("c", 3)])
    assert deducible(ChainKey("c", 0), phi)
    assert not deducible(ChainKey("c", 4), phi)


def test_knowledge_is_normalized_and_ordered():
    """Test knowledge sets store normal forms and compare by inclusion."""
    small = Knowledge.of([f_power(ChainKey("c", 2), 1)])
    assert ChainKey("c", 1) in small
    assert small <= small.union([A])
    assert not small.union([A]) <= small


def test_knowledge_rejects_open_terms():
    """Test that knowledge holds messages only."""
    with pytest.raises(StructuralError):
        Knowledge.of([Var("x")])


def test_synth_candidates_instantiates_shapes():
    """Test shape instances appear when deducible within the depth."""
    phi = Knowledge.of([A, K1])
    candidates = synth_candidates(phi, 1, shapes=[mac(Var("k"), Var("m"))])
    assert A in candidates and K1 in candidates
    assert any(isinstance(c, App) and c.ctor == "mac" for c in candidates)
    assert list(candidates) == sorted(candidates, key=serialize)


def test_synth_candidates_fills_every_position_from_the_base():
    """Test no pattern position is narrowed to a single known message."""
    phi = Knowledge.of([A, B, C])
    candidates = set(synth_candidates(phi, 1, shapes=[pair(Var("_x"), Var("y"))]))
    assert {pair(x, y) for x in (A, B, C) for y in (A, B, C)} <= candidates


def test_synth_candidates_respects_limit():
    """Test the candidate cap keeps the saturated base."""
    phi = Knowledge.of([A, B, C, K1])
    candidates = synth_candidates(phi, 1, shapes=[pair(Var("x"), Var("y"))], limit=6)
    assert {A, B, C, K1} <= set(candidates)
    assert len(candidates) <= 6


# =============================================================================
# Brute-force deduction oracle
# =============================================================================

def _random_term(rng: random.Random, depth: int, with_rewrites: bool = False) -> Term:
    leaves: List[Term] = [A, B, C, K1, K2, ChainKey("c", rng.randrange(4))]
    if depth <= 0 or rng.random() < 0.35:
        return rng.choice(leaves)
    ctors = ["pair", "mac", "hash", "enc", "prf"]
    if with_rewrites:
        ctors += ["F", "dec"]
    ctor = rng.choice(ctors)
    if ctor in ("hash", "F"):
        return App(ctor, (_random_term(rng, depth - 1, with_rewrites),))
    return App(ctor, (_random_term(rng, depth - 1, with_rewrites), _random_term(rng, depth - 1, with_rewrites)))


def _generate(base: FrozenSet[Term], relevant: Set[Term], depth: int) -> Set[Term]:
    """Every term of constructor depth <= depth over base, kept when relevant."""
    known = set(base)
    for _ in range(depth):
        layer = set()
        pool = sorted(known, key=serialize)
        for ctor in ("pair", "mac", "prf", "enc"):
            for left, right in product(pool, pool):
                term = App(ctor, (left, right))
                if term in relevant:
                    layer.add(term)
        for arg in pool:
            term = App("hash", (arg,))
            if term in relevant:
                layer.add(term)
        known |= layer
    return known


def _oracle(w: Term, phi: List[Term], depth: int = 3) -> bool:
    """Destructor closure by iteration, then bottom-up generation."""
    relevant = set(subterms(w))
    for term in phi:
        relevant |= set(subterms(term))
    known: Set[Term] = set(phi)
    while True:
        grown = set(known)
        for term in known:
            if isinstance(term, App) and term.ctor == "pair":
                grown |= set(term.args)
            if isinstance(term, App) and term.ctor == "enc":
                if term.args[0] in _generate(frozenset(known), relevant, depth):
                    grown.add(term.args[1])
            if isinstance(term, ChainKey):
                grown |= {ChainKey(term.chain, i) for i in range(term.index)}
        if grown == known:
            break
        known = grown
    return w in _generate(frozenset(known), relevant | set(known), depth)


def test_deducible_agrees_with_brute_force(rng: random.Random):
    """Test deducible against an independent bottom-up closure on 200 instances."""
    disagreements = []
    for _ in range(200):
        phi = [_random_term(rng, 2) for _ in range(rng.randint(1, 5))]
        if rng.random() < 0.5:
            w = rng.choice([s for term in phi for s in subterms(term)])
        else:
            w = _random_term(rng, 2)
        if term_depth(w) > 3:
            continue
        expected = _oracle(w, phi)
        if deducible(w, Knowledge.of(phi), 3) != expected:
            disagreements.append((serialize(w), [serialize(t) for t in phi], expected))
    assert disagreements == []
