"""
Timed security checks.

Attacker and observer wiring, knowledge sequences, the top attacker built
from per-slot candidate messages, the stability check under that attacker and the
top-attacker criterion, alone or part by part.
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .equivalence import SimResult, simulates
from .errors import PreconditionError, StructuralError, WiringError
from .lts import Bcast, Semantics, Sigma, format_label
from .messages import (
    App, ChainKey, Knowledge, TOTAL_CONSTRUCTORS, Term, Var, apply_rule, composition_depth, deducible,
    f_power, normalize, resolve_term, saturate, serialize, substitute_term, term_vars, unify,
)
from .models import Bounds, CheckReport, Verdict, combine_verdicts
from .syntax import (
    Bang, Call, Deduce, Match, Network, Nil, Node, Process, ProcessDef, RcvTimeout, Sleep,
    SumTimeout, substitute, unfold,
)

logger = logging.getLogger(__name__)

OBSERVER = "obs"
TOP_PREFIX = "TOP_"
CANDIDATE_CAVEAT = (
    "bounded and candidate-relative: the attacker replays known messages its "
    "targets accept, recombines values seen in them up to the stated depth, "
    "forges one instance of a pattern it has seen nothing of, and offers one "
    "rejected message, within the stated sigma layers"
)


# =============================================================================
# Knowledge sequences and wiring
# =============================================================================

@dataclass(frozen=True)
class KnowledgeSequence:
    """Per-slot attacker knowledge; slots past the end repeat the last one."""
    slots: Tuple[Knowledge, ...]
    extension: str = "constant"

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        if not self.slots:
            raise StructuralError("a knowledge sequence needs at least one slot")
        for j in range(1, len(self.slots)):
            if not self.slots[j - 1] <= self.slots[j]:
                raise StructuralError(f"knowledge sequence shrinks at slot {j}")

    @classmethod
    def from_deltas(cls, deltas: Sequence[Iterable[Term]], extension: str = "constant") -> "KnowledgeSequence":
        """Build cumulative slots from the messages each slot adds."""
        slots = []
        current = Knowledge()
        for delta in deltas:
            current = current.union(delta)
            slots.append(current)
        return cls(tuple(slots), extension)

    def at(self, j: int) -> Knowledge:
        return self.slots[min(j, len(self.slots) - 1)]

    def deltas(self) -> List[List[Term]]:
        """Messages new at each slot, sorted by serialization."""
        result = []
        previous: FrozenSet[Term] = frozenset()
        for slot in self.slots:
            result.append(sorted(slot.generators - previous, key=serialize))
            previous = slot.generators
        return result

    def truncated(self) -> "KnowledgeSequence":
        """The constant sequence at slot 0."""
        return KnowledgeSequence((self.slots[0],), "constant")


@dataclass(frozen=True)
class AttackerWiring:
    """Protocol nodes paired positionally with their attackers, plus observed nodes."""
    protocol_nodes: Tuple[str, ...]
    attacker_nodes: Tuple[str, ...]
    observed: FrozenSet[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "protocol_nodes", tuple(self.protocol_nodes))
        object.__setattr__(self, "attacker_nodes", tuple(self.attacker_nodes))
        object.__setattr__(self, "observed", frozenset(self.observed))
        if len(self.protocol_nodes) != len(self.attacker_nodes):
            raise WiringError("every protocol node needs exactly one attacker")
        if set(self.protocol_nodes) & set(self.attacker_nodes):
            raise WiringError("attacker nodes must differ from protocol nodes")
        if len(set(self.attacker_nodes)) != len(self.attacker_nodes):
            raise WiringError("attacker nodes must be distinct")
        if OBSERVER in self.protocol_nodes or OBSERVER in self.attacker_nodes:
            raise WiringError(f"{OBSERVER} is reserved for the observer")
        if not self.observed <= set(self.protocol_nodes):
            raise WiringError("observed nodes must be protocol nodes")

    def pairs(self) -> List[Tuple[str, str]]:
        return list(zip(self.protocol_nodes, self.attacker_nodes))


def wire_observed(m: Network, w: AttackerWiring) -> Network:
    """
    Give every protocol node its attacker and, when observed, the observer.

    Each neighbor set becomes (old ∩ nodes) ∪ {attacker} ∪ ({obs} if observed).

    Raises:
        WiringError: if the wiring names other nodes than the network has.
    """
    names = set(m.names())
    if names != set(w.protocol_nodes):
        raise WiringError(
            f"wiring covers {sorted(w.protocol_nodes)} but the network has {sorted(names)}"
        )
    if names & set(w.attacker_nodes):
        raise WiringError("attacker names clash with network nodes")
    attacker_of = dict(w.pairs())
    nodes = []
    for node in m.nodes:
        neighbors = (node.neighbors & names) | {attacker_of[node.name]}
        if node.name in w.observed:
            neighbors |= {OBSERVER}
        nodes.append(Node(node.name, node.proc, neighbors))
    return m.with_nodes(nodes)


# =============================================================================
# Receive-pattern shapes
# =============================================================================

ShapeTable = Dict[int, FrozenSet[Term]]
_ANY = Var("?")


def _skeleton(term: Term) -> Term:
    names = term_vars(term)
    return substitute_term(term, {name: _ANY for name in names}) if names else term


class _Harvest:
    """
    Symbolic runs over the definition table.

    Discovery walks every branch from the nodes' processes with received
    values left symbolic and records each receive with the slot it is
    reached at. Shape extraction then runs the continuation of one receive,
    letting projections, decryptions and equality tests constrain the
    received variable.
    """

    def __init__(self, defs, call_limit: int, leaf_limit: int, step_limit: int):
        self.defs = defs
        self.call_limit = call_limit
        self.leaf_limit = leaf_limit
        self.step_limit = step_limit
        self.counter = 0
        self.steps = 0

    def fresh(self) -> Var:
        self.counter += 1
        return Var(f"%{self.counter}")

    # -- discovery ---------------------------------------------------------------

    def discover(self, procs: Sequence[Process], horizon: int) -> List[Tuple[RcvTimeout, int]]:
        roots: List[Tuple[RcvTimeout, int]] = []
        seen_calls: Set[Tuple[str, Tuple[Term, ...], int]] = set()
        stack: List[Tuple[Process, int]] = [(proc, 0) for proc in reversed(procs)]
        while stack:
            proc, slot = stack.pop()
            if slot > horizon:
                continue
            if isinstance(proc, Bang):
                stack.append((proc.cont, slot))
            elif isinstance(proc, Sleep):
                stack.append((proc.cont, slot + 1))
            elif isinstance(proc, RcvTimeout):
                roots.append((proc, slot))
                stack.append((proc.timeout, slot + 1))
                stack.append((substitute(proc.body, proc.binder, self.fresh()), slot))
            elif isinstance(proc, SumTimeout):
                stack.append((proc.timeout, slot + 1))
                stack.extend((branch, slot) for branch in proc.branches)
            elif isinstance(proc, Match):
                left, right = normalize(proc.left), normalize(proc.right)
                if term_vars(left) or term_vars(right):
                    stack.extend(((proc.else_, slot), (proc.then, slot)))
                else:
                    stack.append((proc.then if left == right else proc.else_, slot))
            elif isinstance(proc, Deduce):
                stack.extend((branch, slot) for branch in self._deduce_branches(proc))
            elif isinstance(proc, Call) and proc.name in self.defs:
                args = tuple(normalize(arg) for arg in proc.args)
                key = (proc.name, tuple(_skeleton(arg) for arg in args), slot)
                if key in seen_calls:
                    continue
                seen_calls.add(key)
                stack.append((unfold(Call(proc.name, args), self.defs), slot))
        return roots

    def _deduce_branches(self, proc: Deduce) -> List[Process]:
        premises = [normalize(p) for p in proc.premises]
        if not any(term_vars(p) for p in premises):
            result = apply_rule(proc.rule, premises)
            if result is None:
                return [proc.else_]
            return [substitute(proc.then, proc.binder, result)]
        if proc.rule in TOTAL_CONSTRUCTORS:
            return [substitute(proc.then, proc.binder, App(proc.rule, tuple(premises)))]
        return [proc.else_, substitute(proc.then, proc.binder, self.fresh())]

    # -- shape extraction --------------------------------------------------------

    def shapes_from(self, receive: RcvTimeout) -> Set[Term]:
        root = self.fresh()
        body = substitute(receive.body, receive.binder, root)
        found: Set[Term] = set()
        self.steps = 0
        for subst in self._run(body, {}, 0):
            shape = resolve_term(root, subst)
            found.add(_generalize(shape))
            if len(found) >= self.leaf_limit:
                break
        return found

    def _run(self, proc, subst, calls) -> Iterator[Dict[str, Term]]:
        self.steps += 1
        if self.steps > self.step_limit:
            yield subst
            return
        if isinstance(proc, (Nil, SumTimeout)):
            yield subst
        elif isinstance(proc, (Bang, Sleep)):
            yield from self._run(proc.cont, subst, calls)
        elif isinstance(proc, RcvTimeout):
            yield from self._run(substitute(proc.body, proc.binder, self.fresh()), subst, calls)
        elif isinstance(proc, Match):
            extended = _unify_chain(proc.left, proc.right, subst)
            if extended is not None:
                yield from self._run(proc.then, extended, calls)
            if extended is None or term_vars(resolve_term(proc.left, subst)) or term_vars(resolve_term(proc.right, subst)):
                yield from self._run(proc.else_, subst, calls)
        elif isinstance(proc, Deduce):
            yield from self._deduce(proc, subst, calls)
        elif isinstance(proc, Call):
            if calls >= self.call_limit or proc.name not in self.defs:
                yield subst
            else:
                call = Call(proc.name, tuple(normalize(resolve_term(arg, subst)) for arg in proc.args))
                yield from self._run(unfold(call, self.defs), subst, calls + 1)

    def _deduce(self, proc: Deduce, subst, calls):
        premises = [normalize(resolve_term(p, subst)) for p in proc.premises]
        if not any(term_vars(p) for p in premises):
            result = apply_rule(proc.rule, premises)
            branch = proc.else_ if result is None else substitute(proc.then, proc.binder, result)
            yield from self._run(branch, subst, calls)
        elif proc.rule in ("fst", "snd"):
            left, right = self.fresh(), self.fresh()
            extended = unify(premises[0], App("pair", (left, right)), subst)
            if extended is None:
                yield from self._run(proc.else_, subst, calls)
                return
            result = left if proc.rule == "fst" else right
            yield from self._run(substitute(proc.then, proc.binder, result), extended, calls)
        elif proc.rule == "dec":
            body = self.fresh()
            extended = unify(premises[1], App("enc", (premises[0], body)), subst)
            if extended is None:
                yield from self._run(proc.else_, subst, calls)
                return
            yield from self._run(substitute(proc.then, proc.binder, body), extended, calls)
        else:
            result = App(proc.rule, tuple(premises))
            yield from self._run(substitute(proc.then, proc.binder, result), subst, calls)


def _chain_level(term: Term) -> Optional[Tuple[str, int]]:
    """Position of a closed chain term: F^d(k<c>_0) sits at level -d."""
    layers, inner = _f_layers(normalize(term))
    if isinstance(inner, ChainKey):
        return inner.chain, inner.index - layers
    return None


def _f_layers(term: Term) -> Tuple[int, Term]:
    layers = 0
    while isinstance(term, App) and term.ctor == "F":
        term = term.args[0]
        layers += 1
    return layers, term


def _unify_chain(left: Term, right: Term, subst: Dict[str, Term]) -> Optional[Dict[str, Term]]:
    """Unification that also solves F^e(x) = k for a closed chain key k."""
    left = normalize(resolve_term(left, subst))
    right = normalize(resolve_term(right, subst))
    found = unify(left, right, subst)
    if found is not None:
        return found
    for a, b in ((left, right), (right, left)):
        layers, inner = _f_layers(a)
        level = None if term_vars(b) else _chain_level(b)
        if layers and isinstance(inner, Var) and level is not None:
            chain, index = level
            target = index + layers
            solution = ChainKey(chain, target) if target >= 0 else f_power(ChainKey(chain, 0), -target)
            return unify(inner, solution, subst)
    return None


def _generalize(shape: Term) -> Term:
    """Rename variables canonically, in order of first occurrence."""
    order: List[str] = []
    _collect_vars(shape, order)
    mapping: Dict[str, Term] = {}
    for name in order:
        if name not in mapping:
            mapping[name] = Var(f"x{len(mapping)}")
    return normalize(substitute_term(shape, mapping))


def _collect_vars(term: Term, order: List[str]) -> None:
    if isinstance(term, Var):
        order.append(term.name)
    elif isinstance(term, App):
        for arg in term.args:
            _collect_vars(arg, order)


def _matches(pattern: Term, term: Term, binding: Dict[str, Term]) -> bool:
    """One-way matching; variables of `term` count as constants."""
    if isinstance(pattern, Var):
        bound = binding.setdefault(pattern.name, term)
        return bound == term
    if isinstance(pattern, App):
        return (
            isinstance(term, App)
            and term.ctor == pattern.ctor
            and all(_matches(p, t, binding) for p, t in zip(pattern.args, term.args))
        )
    return pattern == term


def _most_specific(shapes: Set[Term]) -> Set[Term]:
    return {
        shape for shape in shapes
        if not any(other != shape and _matches(shape, other, {}) for other in shapes)
    }


def harvest_shapes(
    m: Network,
    horizon: int = 11,
    call_limit: int = 10,
    leaf_limit: int = 64,
    step_limit: int = 5000,
) -> ShapeTable:
    """
    Message patterns the receivers of `m` inspect, keyed by the slot at which
    the receive can be reached.

    Args:
        m: Protocol network, unwired.
        horizon: Last slot considered.
        call_limit: Calls unfolded while following one receive's continuation.
        leaf_limit: Most patterns kept per receive.
        step_limit: Work budget per receive.

    Returns:
        slot -> patterns; slots with no receive are absent. A pattern that
        another pattern of the same receive refines is dropped.
    """
    harvest = _Harvest(m.defs, call_limit, leaf_limit, step_limit)
    table: Dict[int, Set[Term]] = {}
    cache: Dict[Tuple[Process, int], Set[Term]] = {}
    roots = harvest.discover([node.proc for node in m.nodes], horizon)
    for receive, slot in roots:
        key = (receive, slot)
        if key not in cache:
            cache[key] = _most_specific(harvest.shapes_from(receive))
        table.setdefault(slot, set()).update(cache[key])
    logger.debug("harvested shapes at %d slots from %d receives", len(table), len(roots))
    return {slot: frozenset(shapes) for slot, shapes in sorted(table.items())}


# =============================================================================
# Top attacker
# =============================================================================

def slot_candidates(
    phi: Knowledge,
    shapes: Iterable[Term],
    depth: int = 2,
    limit: Optional[int] = None,
) -> Tuple[Term, ...]:
    """
    Messages the top attacker offers at one slot.

    Known messages some pattern accepts are replayed. Pattern variables take
    the values seen at the same position in those messages, or the first known
    message when nothing was seen there, and every instance composable within
    `depth` layers is offered. The first known message no pattern accepts
    stands in for everything the receivers reject.
    """
    base = saturate(phi)
    ordered = sorted(base, key=serialize)
    found: Dict[Term, None] = {}
    for shape in sorted(set(shapes), key=serialize):
        names = sorted(term_vars(shape))
        seen: Dict[str, Dict[Term, None]] = {name: {} for name in names}
        for known in ordered:
            subst = _unify_chain(shape, known, {})
            if subst is None:
                continue
            found[known] = None
            for name in names:
                seen[name][normalize(resolve_term(Var(name), subst))] = None
        if not names:
            continue
        pools = [list(seen[name]) or ordered[:1] for name in names]
        for combo in product(*pools):
            instance = normalize(substitute_term(shape, dict(zip(names, combo))))
            if instance in found:
                continue
            layers = composition_depth(instance, base)
            if layers is not None and layers <= depth:
                found[instance] = None
    rejected = next((known for known in ordered if known not in found), None)
    if rejected is not None:
        found[rejected] = None
    result = sorted(found, key=serialize)
    if limit is not None and len(result) > limit:
        logger.debug("slot candidates truncated from %d to %d", len(result), limit)
        result = result[:limit]
    return tuple(result)


def top_attacker(
    w: AttackerWiring,
    phi: KnowledgeSequence,
    shapes: Union[Iterable[Term], Mapping[int, Iterable[Term]]] = (),
    depth: int = 2,
    max_sigma: int = 10,
    limit: Optional[int] = None,
) -> Network:
    """
    The most general attacker: at slot j each attacker node may broadcast any
    candidate built from phi_j to its protocol node, any number of times, or
    let time pass into slot j+1.

    `shapes` is either one pattern set for every slot or a table keyed by
    slot. Slots past `max_sigma` + 1 repeat the last one.
    """
    if isinstance(shapes, Mapping):
        table = {slot: frozenset(found) for slot, found in shapes.items()}
    else:
        table = None
        shared = frozenset(shapes)
    last = max_sigma + 1
    defs: Dict[str, ProcessDef] = {}
    for j in range(last + 1):
        name = f"{TOP_PREFIX}{j}"
        after = Call(f"{TOP_PREFIX}{min(j + 1, last)}")
        at_slot = table.get(j, frozenset()) if table is not None else shared
        candidates = slot_candidates(phi.at(j), at_slot, depth, limit)
        if candidates:
            branches = tuple(Bang(candidate, Call(name)) for candidate in candidates)
            body: Process = SumTimeout(branches, after)
        else:
            body = Sleep(after)
        defs[name] = ProcessDef(name, (), body)
    nodes = tuple(
        Node(attacker, Call(f"{TOP_PREFIX}0"), frozenset({protocol}))
        for protocol, attacker in w.pairs()
    )
    return Network(nodes, defs)


# =============================================================================
# Stability
# =============================================================================

def _escapes(
    system: Network,
    protocol: FrozenSet[str],
    phi: KnowledgeSequence,
    max_sigma: int,
    depth: int,
    state_budget: int,
    fuse: Iterable[str] = (),
) -> Tuple[List[Tuple[int, str, Term]], int, bool]:
    """Protocol-node broadcasts at slot j that phi_j cannot deduce."""
    semantics = Semantics(system, fuse=fuse)
    seen = {semantics.initial(): 0}
    layer = [semantics.initial()]
    escapes: Dict[Tuple[int, str, Term], None] = {}
    complete = True
    for slot in range(max_sigma + 1):
        queue = deque(layer)
        next_layer = []
        knowledge = phi.at(slot)
        while queue:
            state = queue.popleft()
            for label, successor in semantics.transitions(state):
                if isinstance(label, Bcast) and label.sender in protocol:
                    if not deducible(label.payload, knowledge, depth):
                        escapes[(slot, label.sender, label.payload)] = None
                if successor in seen:
                    continue
                if isinstance(label, Sigma):
                    seen[successor] = slot + 1
                    next_layer.append(successor)
                else:
                    seen[successor] = slot
                    queue.append(successor)
            if len(seen) > state_budget:
                complete = False
                logger.warning("stability exploration stopped at %d states", len(seen))
                return list(escapes), len(seen), complete
        layer = next_layer
    return list(escapes), len(seen), complete


def check_stability(
    m: Network,
    w: AttackerWiring,
    phi: KnowledgeSequence,
    max_sigma: int = 10,
    depth: int = 2,
    state_budget: int = 200000,
    shapes: Optional[ShapeTable] = None,
    candidate_depth: int = 2,
    max_candidates: Optional[int] = None,
) -> CheckReport:
    """
    Stability: while the top attacker feeds the protocol candidates from
    phi, every message a protocol node broadcasts at slot j is deducible
    from phi_j.

    Args:
        m: Protocol system.
        w: Attacker wiring.
        phi: Claimed knowledge sequence.
        depth: Constructor layers a broadcast may need on top of phi_j.
        shapes: Receive patterns; harvested from m when omitted.
        candidate_depth: Layers the attacker's candidates may add.
        max_candidates: Optional cap on candidates per slot.
    """
    shapes = harvest_shapes(m, max_sigma + 1) if shapes is None else shapes
    top = top_attacker(w, phi, shapes, candidate_depth, max_sigma, max_candidates)
    attacked = wire_observed(m, w).compose(top)
    escapes, explored, complete = _escapes(
        attacked, frozenset(w.protocol_nodes), phi, max_sigma, depth, state_budget, w.attacker_nodes
    )
    violations = [
        f"slot {slot}: {serialize(payload)} from {sender}"
        for slot, sender, payload in sorted(escapes, key=lambda e: (e[0], e[1], serialize(e[2])))
    ]
    if violations:
        verdict = Verdict.FAILS
    elif not complete:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.HOLDS
    return CheckReport(
        check="stability",
        subject=", ".join(w.protocol_nodes),
        verdict=verdict,
        bounds=Bounds(max_sigma=max_sigma, deduction_depth=depth, candidate_depth=candidate_depth),
        evidence=[f"explored {explored} states with the top attacker"],
        violations=violations,
        caveats=[CANDIDATE_CAVEAT],
    )


def derive_knowledge_sequence(
    m: Network,
    w: AttackerWiring,
    max_sigma: int,
    initial: Iterable[Term] = (),
    state_budget: int = 200000,
) -> KnowledgeSequence:
    """
    Record what protocol nodes broadcast, slot by slot, in an attacker-free run.

    Returns:
        phi_j = initial ∪ every payload broadcast at slots 0..j.
    """
    wired = wire_observed(m, w)
    protocol = frozenset(w.protocol_nodes)
    semantics = Semantics(wired)
    seen = {semantics.initial()}
    layer = [semantics.initial()]
    deltas: List[List[Term]] = []
    for slot in range(max_sigma + 1):
        heard: Dict[Term, None] = {}
        queue = deque(layer)
        next_layer = []
        while queue:
            state = queue.popleft()
            for label, successor in semantics.transitions(state):
                if isinstance(label, Bcast) and label.sender in protocol:
                    heard[label.payload] = None
                if successor in seen or len(seen) > state_budget:
                    continue
                seen.add(successor)
                (next_layer if isinstance(label, Sigma) else queue).append(successor)
        deltas.append((list(initial) if slot == 0 else []) + list(heard))
        layer = next_layer
    return KnowledgeSequence.from_deltas(deltas, "recorded")


# =============================================================================
# The criterion
# =============================================================================

@dataclass
class TgndcQuery:
    """A system, its specification, the attacker wiring and the knowledge sequence."""
    system: Network
    spec: Network
    wiring: AttackerWiring
    phi: KnowledgeSequence
    bounds: Bounds
    name: str = ""
    shapes: Optional[ShapeTable] = None

    def __post_init__(self):
        env = set().union(*(node.neighbors for node in self.spec.nodes)) - set(self.spec.names())
        if env - {OBSERVER}:
            raise WiringError(f"spec environment may only contain {OBSERVER}, found {sorted(env)}")


def attacked_system(
    q: TgndcQuery,
    max_candidates: Optional[int] = None,
) -> Network:
    """The wired system composed with its top attacker."""
    shapes = harvest_shapes(q.system, q.bounds.max_sigma + 1) if q.shapes is None else q.shapes
    depth = _candidate_depth(q.bounds)
    top = top_attacker(q.wiring, q.phi, shapes, depth, q.bounds.max_sigma, max_candidates)
    return wire_observed(q.system, q.wiring).compose(top)


def check_tgndc(
    q: TgndcQuery,
    tau_bound: int = 64,
    state_budget: int = 200000,
    max_candidates: Optional[int] = None,
    require_stability: bool = True,
) -> SimResult:
    """
    The top-attacker criterion: wired system | top attacker ≲ spec.

    Raises:
        PreconditionError: when the system is not stable for q.phi.
    """
    if q.shapes is None:
        q = replace(q, shapes=harvest_shapes(q.system, q.bounds.max_sigma + 1))
    if require_stability:
        stability = check_stability(
            q.system, q.wiring, q.phi, q.bounds.max_sigma, _deduction_depth(q.bounds), state_budget,
            q.shapes, _candidate_depth(q.bounds), max_candidates,
        )
        if not stability.ok:
            first = stability.violations[0] if stability.violations else "exploration incomplete"
            raise PreconditionError(f"system is not stable for the knowledge sequence: {first}")
    composed = attacked_system(q, max_candidates)
    logger.info("checking %s against its spec", q.name or "system")
    return simulates(
        q.spec, composed, q.bounds.max_sigma,
        tau_bound=tau_bound, state_budget=state_budget, fuse=q.wiring.attacker_nodes,
    )


def _deduction_depth(bounds: Bounds) -> int:
    return bounds.deduction_depth if bounds.deduction_depth is not None else 2


def _candidate_depth(bounds: Bounds) -> int:
    return bounds.candidate_depth if bounds.candidate_depth is not None else 2


def tgndc_report(q: TgndcQuery, result: SimResult) -> CheckReport:
    """Render a criterion result."""
    evidence = [f"explored {result.explored_pairs} pairs"]
    if result.verdict == Verdict.HOLDS:
        evidence.insert(0, "tGNDC holds (bounded, candidate-relative)")
    if result.counterexample is not None:
        evidence.append(f"unmatched label: {format_label(result.counterexample.blocking)}")
        if not result.counterexample.replayable:
            evidence.append("the trace also runs on the spec; the systems part ways only in their branching")
    return CheckReport(
        check="tgndc",
        subject=q.name,
        verdict=result.verdict,
        bounds=q.bounds,
        evidence=evidence,
        notes=list(result.notes),
        caveats=[CANDIDATE_CAVEAT],
        traces=result.traces("attack"),
    )


@dataclass
class TgndcPart:
    """One component of a compositional check."""
    name: str
    network: Network
    spec: Network
    observed: FrozenSet[str]
    attackers: Tuple[str, ...]

    def wiring(self) -> AttackerWiring:
        return AttackerWiring(tuple(node.name for node in self.network.nodes), self.attackers, self.observed)


def check_tgndc_compositional(
    parts: Sequence[TgndcPart],
    phi: KnowledgeSequence,
    bounds: Bounds,
    tau_bound: int = 64,
    state_budget: int = 200000,
    max_candidates: Optional[int] = None,
    jobs: int = 1,
) -> CheckReport:
    """
    Check each part against its own spec with its own top attacker, after a
    joint stability check of the composed system; all holding means the
    composition of the parts satisfies the composition of the specs.
    """
    attackers = [a for part in parts for a in part.attackers]
    if len(set(attackers)) != len(attackers):
        raise WiringError("parts must use disjoint attacker sets")
    whole = parts[0].network.compose(*(part.network for part in parts[1:]))
    joint = AttackerWiring(
        tuple(n for part in parts for n in part.wiring().protocol_nodes),
        tuple(attackers),
        frozenset().union(*(part.observed for part in parts)),
    )
    stability = check_stability(
        whole, joint, phi, bounds.max_sigma, _deduction_depth(bounds), state_budget,
        candidate_depth=_candidate_depth(bounds), max_candidates=max_candidates,
    )
    if not stability.ok:
        first = stability.violations[0] if stability.violations else "exploration incomplete"
        raise PreconditionError(f"composed system is not stable for the knowledge sequence: {first}")

    def run(part: TgndcPart) -> Tuple[TgndcPart, SimResult]:
        query = TgndcQuery(part.network, part.spec, part.wiring(), phi, bounds, part.name)
        return part, check_tgndc(query, tau_bound, state_budget, max_candidates, require_stability=False)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(part) for part in parts]

    evidence = []
    traces = {}
    for part, result in results:
        evidence.append(f"part {part.name}: {result.verdict.value} ({result.explored_pairs} pairs)")
        traces.update(result.traces(part.name))
    verdict = combine_verdicts([result.verdict for _, result in results])
    if verdict == Verdict.HOLDS:
        evidence.insert(0, "tGNDC holds for the composed specification (bounded, candidate-relative)")
    return CheckReport(
        check="tgndc-compositional",
        subject=" | ".join(part.name for part in parts),
        verdict=verdict,
        bounds=bounds,
        evidence=evidence,
        notes=[f"stability: {stability.verdict.value} ({stability.evidence[0]})"],
        caveats=[CANDIDATE_CAVEAT],
        traces=traces,
    )
