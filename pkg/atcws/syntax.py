"""
Process and network syntax.

Immutable AST for processes, definitions, nodes and networks together with
substitution, structural congruence, well-formedness, topology queries, the
message-extraction function and the syntactic well-timedness test.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Iterator, List, Mapping, Optional, Set, Tuple, Union

from .errors import StructuralError
from .messages import App, Term, Var, is_message, normalize, serialize, substitute_term, term_vars
from .models import CheckReport, Verdict

logger = logging.getLogger(__name__)


def _cached_hash(self) -> int:
    try:
        return self.__dict__["_hash"]
    except KeyError:
        value = hash((type(self),) + tuple(getattr(self, name) for name in self.__dataclass_fields__))
        object.__setattr__(self, "_hash", value)
        return value


# =============================================================================
# Processes
# =============================================================================

@dataclass(frozen=True)
class Nil:
    """The terminated process."""


NIL = Nil()


@dataclass(frozen=True)
class Bang:
    """Broadcast `payload`, then continue as `cont`."""
    payload: Term
    cont: "Process"
    __hash__ = _cached_hash


@dataclass(frozen=True)
class RcvTimeout:
    """Receive into `binder` and run `body`, or run `timeout` after a sigma."""
    binder: str
    body: "Process"
    timeout: "Process"
    __hash__ = _cached_hash


@dataclass(frozen=True)
class SumTimeout:
    """Internal choice among `branches`, or `timeout` after a sigma."""
    branches: Tuple["Process", ...]
    timeout: "Process"
    __hash__ = _cached_hash

    def __post_init__(self):
        if not self.branches:
            raise StructuralError("a choice needs at least one branch")


@dataclass(frozen=True)
class Sleep:
    cont: "Process"
    __hash__ = _cached_hash


@dataclass(frozen=True)
class Match:
    left: Term
    right: Term
    then: "Process"
    else_: "Process"
    __hash__ = _cached_hash


@dataclass(frozen=True)
class Deduce:
    """Apply `rule` to `premises`; bind the conclusion to `binder` in `then`."""
    premises: Tuple[Term, ...]
    rule: str
    binder: str
    then: "Process"
    else_: "Process"
    __hash__ = _cached_hash


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple[Term, ...] = ()
    __hash__ = _cached_hash


Process = Union[Nil, Bang, RcvTimeout, SumTimeout, Sleep, Match, Deduce, Call]


def children(proc: Process) -> Tuple[Process, ...]:
    """Immediate sub-processes, in field order."""
    if isinstance(proc, (Bang, Sleep)):
        return (proc.cont,)
    if isinstance(proc, RcvTimeout):
        return (proc.body, proc.timeout)
    if isinstance(proc, SumTimeout):
        return proc.branches + (proc.timeout,)
    if isinstance(proc, (Match, Deduce)):
        return (proc.then, proc.else_)
    return ()


def terms_of(proc: Process) -> Tuple[Term, ...]:
    """Terms written directly in the head of `proc`."""
    if isinstance(proc, Bang):
        return (proc.payload,)
    if isinstance(proc, Match):
        return (proc.left, proc.right)
    if isinstance(proc, Deduce):
        return proc.premises
    if isinstance(proc, Call):
        return proc.args
    return ()


# =============================================================================
# Definitions, nodes and networks
# =============================================================================

@dataclass(frozen=True)
class ProcessDef:
    name: str
    params: Tuple[str, ...]
    body: Process


@dataclass(frozen=True)
class Node:
    """A located process `name[proc]` with neighbor set `neighbors`."""
    name: str
    proc: Process
    neighbors: FrozenSet[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "neighbors", frozenset(self.neighbors))
        if self.name in self.neighbors:
            raise StructuralError(f"node {self.name} lists itself as a neighbor")


@dataclass(frozen=True)
class Network:
    """Parallel composition of nodes sharing one definition table."""
    nodes: Tuple[Node, ...] = ()
    defs: Mapping[str, ProcessDef] = field(default_factory=dict)

    __hash__ = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def names(self) -> Tuple[str, ...]:
        return tuple(node.name for node in self.nodes)

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise StructuralError(f"unknown node {name}")

    def compose(self, *others: "Network") -> "Network":
        """
        Parallel composition with merged definition tables.

        Raises:
            StructuralError: if two tables define one name differently.
        """
        defs = dict(self.defs)
        nodes = list(self.nodes)
        for other in others:
            for name, definition in other.defs.items():
                if name in defs and defs[name] != definition:
                    raise StructuralError(f"conflicting definitions for {name}")
                defs[name] = definition
            nodes.extend(other.nodes)
        return Network(tuple(nodes), defs)

    def with_nodes(self, nodes: Iterable[Node]) -> "Network":
        return Network(tuple(nodes), self.defs)

    def restrict(self, names: Iterable[str]) -> "Network":
        """Sub-network of the named nodes, neighbor sets untouched."""
        keep = set(names)
        return Network(tuple(node for node in self.nodes if node.name in keep), self.defs)


# =============================================================================
# Substitution
# =============================================================================

def free_vars(proc: Process) -> FrozenSet[str]:
    """Variables occurring free in `proc`."""
    found: Set[str] = set()
    for term in terms_of(proc):
        found |= term_vars(term)
    if isinstance(proc, RcvTimeout):
        found |= free_vars(proc.body) - {proc.binder}
        found |= free_vars(proc.timeout)
    elif isinstance(proc, Deduce):
        found |= free_vars(proc.then) - {proc.binder}
        found |= free_vars(proc.else_)
    else:
        for child in children(proc):
            found |= free_vars(child)
    return frozenset(found)


def substitute(proc: Process, binder: str, w: Term) -> Process:
    """
    Replace free occurrences of `binder` by the message `w`.

    Only closed messages are substituted, so no variable capture can occur;
    an inner binder with the same name shadows the outer one.
    """
    return substitute_many(proc, {binder: w})


def substitute_many(proc: Process, mapping: Mapping[str, Term]) -> Process:
    if not mapping:
        return proc
    if isinstance(proc, Nil):
        return proc
    if isinstance(proc, Bang):
        return Bang(substitute_term(proc.payload, mapping), substitute_many(proc.cont, mapping))
    if isinstance(proc, RcvTimeout):
        inner = {k: v for k, v in mapping.items() if k != proc.binder}
        return RcvTimeout(
            proc.binder,
            substitute_many(proc.body, inner),
            substitute_many(proc.timeout, mapping),
        )
    if isinstance(proc, SumTimeout):
        return SumTimeout(
            tuple(substitute_many(branch, mapping) for branch in proc.branches),
            substitute_many(proc.timeout, mapping),
        )
    if isinstance(proc, Sleep):
        return Sleep(substitute_many(proc.cont, mapping))
    if isinstance(proc, Match):
        return Match(
            substitute_term(proc.left, mapping),
            substitute_term(proc.right, mapping),
            substitute_many(proc.then, mapping),
            substitute_many(proc.else_, mapping),
        )
    if isinstance(proc, Deduce):
        inner = {k: v for k, v in mapping.items() if k != proc.binder}
        return Deduce(
            tuple(substitute_term(t, mapping) for t in proc.premises),
            proc.rule,
            proc.binder,
            substitute_many(proc.then, inner),
            substitute_many(proc.else_, mapping),
        )
    if isinstance(proc, Call):
        return Call(proc.name, tuple(substitute_term(t, mapping) for t in proc.args))
    raise StructuralError(f"not a process: {proc!r}")


def unfold(call: Call, defs: Mapping[str, ProcessDef]) -> Process:
    """
    One definition unfolding: H<u> becomes the body with u for the parameters.

    Raises:
        StructuralError: undefined name or wrong argument count.
    """
    definition = defs.get(call.name)
    if definition is None:
        raise StructuralError(f"call to undefined process {call.name}")
    if len(definition.params) != len(call.args):
        raise StructuralError(
            f"{call.name} takes {len(definition.params)} argument(s), got {len(call.args)}"
        )
    return substitute_many(definition.body, dict(zip(definition.params, call.args)))


def calls_in(proc: Process) -> Iterator[Call]:
    if isinstance(proc, Call):
        yield proc
    for child in children(proc):
        yield from calls_in(child)


# =============================================================================
# Topology and well-formedness
# =============================================================================

@dataclass(frozen=True)
class Topology:
    nds: FrozenSet[str]
    ngh: Mapping[str, FrozenSet[str]]
    env: FrozenSet[str]

    def neighbors(self, name: str) -> FrozenSet[str]:
        if name not in self.ngh:
            raise StructuralError(f"unknown node {name}")
        return self.ngh[name]


def topology(m: Network) -> Topology:
    """
    Node names, neighbor map and environment of a network.

    Returns:
        Topology whose env is every listed neighbor that is not a node.
    """
    nds = frozenset(m.names())
    ngh = {node.name: node.neighbors for node in m.nodes}
    env = frozenset().union(*ngh.values()) - nds if ngh else frozenset()
    return Topology(nds, ngh, env)


def structural_violations(m: Network, connectivity: bool = True) -> List[str]:
    """
    Violations of the well-formedness clauses.

    Args:
        m: Network to check.
        connectivity: Whether to require in-network connectivity.

    Returns:
        One message per violation; empty when well-formed.
    """
    violations = []
    seen: Set[str] = set()
    for node in m.nodes:
        if node.name in seen:
            violations.append(f"duplicate node name {node.name}")
        seen.add(node.name)
    by_name = {node.name: node for node in m.nodes}
    for node in m.nodes:
        for other in sorted(node.neighbors):
            if other in by_name and node.name not in by_name[other].neighbors:
                violations.append(
                    f"asymmetric neighbors: {node.name} lists {other} but {other} does not list {node.name}"
                )
    if connectivity and by_name:
        start = m.nodes[0].name
        reached = {start}
        queue = deque([start])
        while queue:
            current = queue.popleft()
            for other in by_name[current].neighbors:
                if other in by_name and other not in reached:
                    reached.add(other)
                    queue.append(other)
        missing = sorted(set(by_name) - reached)
        if missing:
            violations.append(f"not connected: {', '.join(missing)} unreachable from {start}")
    return violations


def check_well_formed(m: Network, connectivity: bool = True) -> CheckReport:
    """
    Check distinct names, symmetric neighboring and connectivity.

    Neighbor names outside the network (observers, attacker slots) are
    exempt and listed as notes.
    """
    violations = structural_violations(m, connectivity)
    env = topology(m).env
    notes = [f"environment neighbors: {', '.join(sorted(env))}"] if env else []
    return CheckReport(
        check="well-formedness",
        subject=", ".join(m.names()) or "0",
        verdict=Verdict.FAILS if violations else Verdict.HOLDS,
        violations=violations,
        notes=notes,
    )


# =============================================================================
# Messages of a process
# =============================================================================

def get(u: Term) -> FrozenSet[Term]:
    """Messages exposed by a value: itself and its direct arguments when closed."""
    u = normalize(u)
    if isinstance(u, Var):
        return frozenset()
    if isinstance(u, App):
        if is_message(u):
            return frozenset({u}) | frozenset(u.args)
        return frozenset().union(*(get(arg) for arg in u.args))
    return frozenset({u})


def msg_of_process(
    proc: Process,
    defs: Mapping[str, ProcessDef],
    unwound: FrozenSet[str] = frozenset()
) -> FrozenSet[Term]:
    """Messages appearing in `proc`, unwinding each definition once."""
    found: Set[Term] = set()
    stack = [(proc, unwound)]
    while stack:
        current, seen = stack.pop()
        for term in terms_of(current):
            found |= get(term)
        if isinstance(current, Call):
            definition = defs.get(current.name)
            if definition is None:
                raise StructuralError(f"call to undefined process {current.name}")
            if current.name not in seen:
                stack.append((definition.body, seen | {current.name}))
            continue
        for child in children(current):
            stack.append((child, seen))
    return frozenset(found)


def msg_of(m: Union[Network, Process], defs: Optional[Mapping[str, ProcessDef]] = None) -> FrozenSet[Term]:
    """Messages a network (or a single process) can manipulate."""
    if isinstance(m, Network):
        found: Set[Term] = set()
        for node in m.nodes:
            found |= msg_of_process(node.proc, m.defs)
        return frozenset(found)
    return msg_of_process(m, defs or {})


# =============================================================================
# Well-timedness
# =============================================================================

def _unguarded_calls(proc: Process) -> Iterator[str]:
    """Names called before any sigma must fire."""
    if isinstance(proc, Call):
        yield proc.name
    elif isinstance(proc, Sleep):
        return
    elif isinstance(proc, RcvTimeout):
        yield from _unguarded_calls(proc.body)
    elif isinstance(proc, SumTimeout):
        for branch in proc.branches:
            yield from _unguarded_calls(branch)
    else:
        for child in children(proc):
            yield from _unguarded_calls(child)


def well_timed_violations(m: Network) -> List[str]:
    """
    Definitions that can re-enter themselves without a sigma in between.

    Returns:
        One message per definition on an unguarded cycle.
    """
    graph = {name: sorted(set(_unguarded_calls(d.body))) for name, d in m.defs.items()}
    for node in m.nodes:
        for call in calls_in(node.proc):
            if call.name not in m.defs:
                raise StructuralError(f"call to undefined process {call.name}")
    violations = []
    for name in sorted(graph):
        if _reaches(graph, name, name):
            violations.append(f"{name} recurses without a time guard")
    return violations


def _reaches(graph: Mapping[str, List[str]], start: str, target: str) -> bool:
    seen: Set[str] = set()
    stack = list(graph.get(start, ()))
    while stack:
        current = stack.pop()
        if current == target:
            return True
        if current in seen:
            continue
        seen.add(current)
        stack.extend(graph.get(current, ()))
    return False


def is_well_timed_syntax(m: Network) -> bool:
    """True iff every recursive call is time-guarded."""
    return not well_timed_violations(m)


# =============================================================================
# Structural congruence
# =============================================================================

def canonical_process(proc: Process, defs: Mapping[str, ProcessDef], bound: int = 32) -> Process:
    """
    Canonical form: normalized terms, sorted choice branches, head calls unfolded.
    """
    unfolds = 0
    while isinstance(proc, Call) and unfolds < bound and proc.name in defs:
        proc = unfold(proc, defs)
        unfolds += 1
    return _canonical(proc)


def _canonical(proc: Process) -> Process:
    if isinstance(proc, Nil):
        return proc
    if isinstance(proc, Bang):
        return Bang(normalize(proc.payload), _canonical(proc.cont))
    if isinstance(proc, RcvTimeout):
        return RcvTimeout(proc.binder, _canonical(proc.body), _canonical(proc.timeout))
    if isinstance(proc, SumTimeout):
        branches = sorted((_canonical(b) for b in proc.branches), key=repr)
        return SumTimeout(tuple(branches), _canonical(proc.timeout))
    if isinstance(proc, Sleep):
        return Sleep(_canonical(proc.cont))
    if isinstance(proc, Match):
        return Match(normalize(proc.left), normalize(proc.right), _canonical(proc.then), _canonical(proc.else_))
    if isinstance(proc, Deduce):
        return Deduce(
            tuple(normalize(t) for t in proc.premises), proc.rule, proc.binder,
            _canonical(proc.then), _canonical(proc.else_),
        )
    return Call(proc.name, tuple(normalize(t) for t in proc.args))


def canonical_form(m: Network, bound: int = 32) -> Tuple[Tuple[str, Process, FrozenSet[str]], ...]:
    entries = [
        (node.name, canonical_process(node.proc, m.defs, bound), node.neighbors)
        for node in m.nodes
    ]
    return tuple(sorted(entries, key=lambda entry: entry[0]))


def struct_congruent(m: Network, n: Network, bound: int = 32) -> bool:
    """Decide structural congruence by comparing canonical forms."""
    return canonical_form(m, bound) == canonical_form(n, bound)
