"""
Symbolic messages and deduction.

Terms are immutable values built from atoms, one-way chain keys, variables
and constructor applications. A knowledge set is closed under destructors
(saturation) and membership of a message is then decided by composing total
constructors on top of the saturated base.
"""

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

from .errors import StructuralError

logger = logging.getLogger(__name__)

ATOM_KINDS = ("node-name", "tag", "nonce", "base-key", "other")
ARITIES = {"pair": 2, "mac": 2, "prf": 2, "hash": 1, "enc": 2, "dec": 2, "F": 1}
TOTAL_CONSTRUCTORS = frozenset({"pair", "mac", "prf", "hash", "enc", "F"})
CHAIN_KEY = re.compile(r"^k([A-Za-z]+)_(\d+)$")


# =============================================================================
# Terms
# =============================================================================

@dataclass(frozen=True)
class Atom:
    """A name: node name, tag, nonce seed, base key or plain constant."""
    name: str
    kind: str = field(default="other", compare=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ChainKey:
    """Key `index` of the one-way chain `chain`; F maps index i+1 to i."""
    chain: str
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise StructuralError(f"chain key index must be >= 0, got {self.index}")

    def __str__(self) -> str:
        return f"k{self.chain}_{self.index}"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    """Constructor application."""
    ctor: str
    args: Tuple["Term", ...]

    def __post_init__(self):
        arity = ARITIES.get(self.ctor)
        if arity is None:
            raise StructuralError(f"unknown constructor {self.ctor}")
        if len(self.args) != arity:
            raise StructuralError(
                f"{self.ctor} takes {arity} argument(s), got {len(self.args)}"
            )

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            value = hash((self.ctor, self.args))
            object.__setattr__(self, "_hash", value)
            return value

    def __str__(self) -> str:
        return serialize(self)


Term = Union[Atom, ChainKey, Var, App]

BOT = Atom("bot", "other")


def atom(name: str, kind: str = "other") -> Atom:
    return Atom(name, kind)


def pair(left: Term, right: Term) -> App:
    return App("pair", (left, right))


def mac(key: Term, body: Term) -> App:
    return App("mac", (key, body))


def prf(key: Term, body: Term) -> App:
    return App("prf", (key, body))


def hash_(body: Term) -> App:
    return App("hash", (body,))


def enc(key: Term, body: Term) -> App:
    return App("enc", (key, body))


def dec(key: Term, body: Term) -> App:
    return App("dec", (key, body))


def f_power(term: Term, times: int) -> Term:
    """Apply F `times` times without normalizing."""
    for _ in range(times):
        term = App("F", (term,))
    return term


def number(value: int) -> Atom:
    return Atom(str(value), "other")


@lru_cache(maxsize=None)
def serialize(term: Term) -> str:
    """
    Canonical text form of a term.

    Returns:
        e.g. `pair(req,pair(m,prf(m,n0)))`, `F(kc_0)`.
    """
    if isinstance(term, App):
        return f"{term.ctor}({','.join(serialize(arg) for arg in term.args)})"
    return str(term)


def sort_key(term: Term) -> str:
    return serialize(term)


def is_message(term: Term) -> bool:
    """A message is a term without variables."""
    if isinstance(term, Var):
        return False
    if isinstance(term, App):
        return all(is_message(arg) for arg in term.args)
    return True


def term_vars(term: Term) -> FrozenSet[str]:
    if isinstance(term, Var):
        return frozenset({term.name})
    if isinstance(term, App):
        return frozenset().union(*(term_vars(arg) for arg in term.args))
    return frozenset()


def term_depth(term: Term) -> int:
    if isinstance(term, App):
        return 1 + max(term_depth(arg) for arg in term.args)
    return 0


def subterms(term: Term) -> Iterator[Term]:
    yield term
    if isinstance(term, App):
        for arg in term.args:
            yield from subterms(arg)


def substitute_term(term: Term, mapping: Mapping[str, Term]) -> Term:
    """Replace variables named in `mapping`; other terms are returned as is."""
    if isinstance(term, Var):
        return mapping.get(term.name, term)
    if isinstance(term, App):
        args = tuple(substitute_term(arg, mapping) for arg in term.args)
        if args == term.args:
            return term
        return App(term.ctor, args)
    return term


@lru_cache(maxsize=None)
def normalize(term: Term) -> Term:
    """
    Rewrite to normal form.

    F(k<c>_<i+1>) becomes k<c>_<i> and dec(k, enc(k, m)) becomes m. The
    result is idempotent and F(k<c>_0) is left alone.
    """
    if not isinstance(term, App):
        return term
    args = tuple(normalize(arg) for arg in term.args)
    if term.ctor == "F":
        inner = args[0]
        if isinstance(inner, ChainKey) and inner.index > 0:
            return ChainKey(inner.chain, inner.index - 1)
    elif term.ctor == "dec":
        key, body = args
        if isinstance(body, App) and body.ctor == "enc" and body.args[0] == key:
            return body.args[1]
    if args == term.args:
        return term
    return App(term.ctor, args)


def unify(
    left: Term,
    right: Term,
    subst: Optional[Dict[str, Term]] = None
) -> Optional[Dict[str, Term]]:
    """
    Syntactic unification of two terms.

    Args:
        left: First term.
        right: Second term.
        subst: Bindings found so far; not mutated.

    Returns:
        An extended substitution, or None when the terms clash.
    """
    subst = dict(subst or {})
    stack = [(left, right)]
    while stack:
        a, b = stack.pop()
        a = _walk(a, subst)
        b = _walk(b, subst)
        if a == b:
            continue
        if isinstance(a, Var):
            if a.name in term_vars(_resolve(b, subst)):
                return None
            subst[a.name] = b
        elif isinstance(b, Var):
            if b.name in term_vars(_resolve(a, subst)):
                return None
            subst[b.name] = a
        elif isinstance(a, App) and isinstance(b, App) and a.ctor == b.ctor:
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return subst


def _walk(term: Term, subst: Mapping[str, Term]) -> Term:
    while isinstance(term, Var) and term.name in subst:
        term = subst[term.name]
    return term


def _resolve(term: Term, subst: Mapping[str, Term]) -> Term:
    term = _walk(term, subst)
    if isinstance(term, App):
        return App(term.ctor, tuple(_resolve(arg, subst) for arg in term.args))
    return term


def resolve_term(term: Term, subst: Mapping[str, Term]) -> Term:
    """Apply a unifier fully."""
    return _resolve(term, subst)


# =============================================================================
# Inference rules
# =============================================================================

@dataclass(frozen=True)
class InferenceRule:
    """A deduction rule: `apply` returns None when the rule does not apply."""
    name: str
    arity: int
    apply: Callable[[Sequence[Term]], Optional[Term]] = field(compare=False, repr=False)


def _constructor(name: str) -> Callable[[Sequence[Term]], Optional[Term]]:
    return lambda premises: App(name, tuple(premises))


def _fst(premises: Sequence[Term]) -> Optional[Term]:
    (term,) = premises
    if isinstance(term, App) and term.ctor == "pair":
        return term.args[0]
    return None


def _snd(premises: Sequence[Term]) -> Optional[Term]:
    (term,) = premises
    if isinstance(term, App) and term.ctor == "pair":
        return term.args[1]
    return None


def _dec(premises: Sequence[Term]) -> Optional[Term]:
    key, body = premises
    if isinstance(body, App) and body.ctor == "enc" and body.args[0] == key:
        return body.args[1]
    return None


RULES: Dict[str, InferenceRule] = {
    "pair": InferenceRule("pair", 2, _constructor("pair")),
    "mac": InferenceRule("mac", 2, _constructor("mac")),
    "prf": InferenceRule("prf", 2, _constructor("prf")),
    "hash": InferenceRule("hash", 1, _constructor("hash")),
    "enc": InferenceRule("enc", 2, _constructor("enc")),
    "F": InferenceRule("F", 1, _constructor("F")),
    "fst": InferenceRule("fst", 1, _fst),
    "snd": InferenceRule("snd", 1, _snd),
    "dec": InferenceRule("dec", 2, _dec),
}


def get_rule(name: str) -> InferenceRule:
    rule = RULES.get(name)
    if rule is None:
        raise StructuralError(f"unknown inference rule {name}")
    return rule


def apply_rule(rule: Union[str, InferenceRule], premises: Sequence[Term]) -> Optional[Term]:
    """
    Apply an inference rule to message premises.

    Args:
        rule: Rule or rule name.
        premises: Messages, in rule order.

    Returns:
        The normalized conclusion, or None when the rule does not apply.

    Raises:
        StructuralError: on arity mismatch or a premise that still holds variables.
    """
    if isinstance(rule, str):
        rule = get_rule(rule)
    if len(premises) != rule.arity:
        raise StructuralError(
            f"rule {rule.name} takes {rule.arity} premise(s), got {len(premises)}"
        )
    for premise in premises:
        if not is_message(premise):
            raise StructuralError(f"premise {serialize(premise)} of {rule.name} is not closed")
    result = rule.apply([normalize(premise) for premise in premises])
    if result is None:
        return None
    return normalize(result)


# =============================================================================
# Knowledge and deduction
# =============================================================================

@dataclass(frozen=True)
class Knowledge:
    """A finite set of messages known to the attacker."""
    generators: FrozenSet[Term] = frozenset()

    def __post_init__(self):
        normalized = frozenset(normalize(term) for term in self.generators)
        for term in normalized:
            if not is_message(term):
                raise StructuralError(f"knowledge holds non-message {serialize(term)}")
        object.__setattr__(self, "generators", normalized)

    @classmethod
    def of(cls, terms: Iterable[Term]) -> "Knowledge":
        return cls(frozenset(terms))

    def union(self, terms: Iterable[Term]) -> "Knowledge":
        return Knowledge(self.generators | frozenset(terms))

    def __contains__(self, term: Term) -> bool:
        return normalize(term) in self.generators

    def __iter__(self) -> Iterator[Term]:
        return iter(sorted(self.generators, key=serialize))

    def __len__(self) -> int:
        return len(self.generators)

    def __le__(self, other: "Knowledge") -> bool:
        return self.generators <= other.generators


@lru_cache(maxsize=4096)
def saturate(phi: Knowledge) -> FrozenSet[Term]:
    """
    Close a knowledge set under destructors.

    Pairs are split, ciphertexts are opened when their key is composable
    from what is known, and chain keys yield every lower key.
    """
    known = set(phi.generators)
    changed = True
    while changed:
        changed = False
        for term in list(known):
            for derived in _destruct(term, known):
                if derived not in known:
                    known.add(derived)
                    changed = True
    return frozenset(known)


def _destruct(term: Term, known: set) -> Iterator[Term]:
    if isinstance(term, App):
        if term.ctor == "pair":
            yield from term.args
        elif term.ctor == "enc":
            key, body = term.args
            if _composable(key, known, term_depth(key)):
                yield body
    elif isinstance(term, ChainKey) and term.index > 0:
        yield ChainKey(term.chain, term.index - 1)


def _composable(term: Term, known, budget: int) -> bool:
    if term in known:
        return True
    if budget <= 0 or not isinstance(term, App) or term.ctor not in TOTAL_CONSTRUCTORS:
        return False
    return all(_composable(arg, known, budget - 1) for arg in term.args)


def deducible(w: Term, phi: Knowledge, depth: Optional[int] = None) -> bool:
    """
    Decide whether `w` can be derived from `phi`.

    Args:
        w: A message.
        phi: Attacker knowledge.
        depth: Most constructor layers allowed on top of the saturated base,
            or None for no limit.

    Returns:
        True iff w is composable over the destructor saturation of phi
        within `depth` layers.
    """
    if not is_message(w):
        raise StructuralError(f"deducible expects a message, got {serialize(w)}")
    layers = composition_depth(normalize(w), saturate(phi))
    return layers is not None and (depth is None or layers <= depth)


def composition_depth(term: Term, base: FrozenSet[Term]) -> Optional[int]:
    """Constructor layers needed above `base` to build `term`, or None."""
    if term in base:
        return 0
    if not isinstance(term, App) or term.ctor not in TOTAL_CONSTRUCTORS:
        return None
    depths = [composition_depth(arg, base) for arg in term.args]
    if any(d is None for d in depths):
        return None
    return 1 + max(depths)


def synth_candidates(
    phi: Knowledge,
    depth: int,
    shapes: Iterable[Term] = (),
    limit: Optional[int] = None
) -> Tuple[Term, ...]:
    """
    Finite stand-in for the messages an attacker can send.

    Args:
        phi: Attacker knowledge.
        depth: Constructor layers allowed above the saturated base.
        shapes: Patterns with variables; every variable ranges over the
            saturated base.
        limit: Optional cap on the result size.

    Returns:
        The saturated base plus every deducible shape instance within
        `depth`, ordered by serialization.
    """
    base = saturate(phi)
    ordered_base = sorted(base, key=serialize)
    found = set(base)
    for shape in sorted(set(shapes), key=serialize):
        names = sorted(term_vars(shape))
        for combo in product(ordered_base, repeat=len(names)):
            instance = normalize(substitute_term(shape, dict(zip(names, combo))))
            if instance in found:
                continue
            layers = composition_depth(instance, base)
            if layers is not None and layers <= depth:
                found.add(instance)
    if limit is not None and len(found) > limit:
        logger.debug("candidate set truncated from %d to %d", len(found), limit)
        extra = sorted(found - base, key=serialize)[:max(0, limit - len(base))]
        found = set(base) | set(extra)
    return tuple(sorted(found, key=serialize))
