"""
Labelled transition semantics.

A `Semantics` object runs one network: it resolves matches, deductions and
calls to a head form, enumerates broadcasts with every lossy reception
choice, takes sigma steps under maximal progress and hides broadcasts nobody
outside the network can hear. States are tuples of per-node processes in
sorted node-name order.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .errors import DslSyntaxError, StructuralError
from .messages import Term, apply_rule, is_message, normalize, serialize
from .syntax import (
    Bang, Call, Deduce, Match, Network, Nil, NIL, Node, Process, RcvTimeout, Sleep,
    SumTimeout, structural_violations, substitute, unfold,
)

logger = logging.getLogger(__name__)


# =============================================================================
# Labels and traces
# =============================================================================

@dataclass(frozen=True)
class Tau:
    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class Sigma:
    def __str__(self) -> str:
        return "sigma"


@dataclass(frozen=True)
class Bcast:
    """Broadcast before hiding; `receivers` are the listeners outside the network."""
    sender: str
    payload: Term
    receivers: FrozenSet[str] = frozenset()

    def __str__(self) -> str:
        return f"bcast {self.sender} {serialize(self.payload)} > {_names(self.receivers)}"


@dataclass(frozen=True)
class Input:
    sender: str
    payload: Term

    def __str__(self) -> str:
        return f"in {self.sender} {serialize(self.payload)}"


@dataclass(frozen=True)
class ObsBcast:
    """An anonymous broadcast heard by `receivers` outside the network."""
    payload: Term
    receivers: FrozenSet[str]

    def __post_init__(self):
        object.__setattr__(self, "receivers", frozenset(self.receivers))
        if not self.receivers:
            raise StructuralError("an observable broadcast needs a receiver")

    def __str__(self) -> str:
        return f"out {serialize(self.payload)} > {_names(self.receivers)}"


TAU = Tau()
SIGMA = Sigma()

Label = Union[Tau, Sigma, Bcast, Input, ObsBcast]


def _names(names: Iterable[str]) -> str:
    return "{" + ",".join(sorted(names)) + "}"


@dataclass(frozen=True)
class Trace:
    steps: Tuple[Label, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __add__(self, other: "Trace") -> "Trace":
        return Trace(self.steps + tuple(other))


def sigma_count(t: Union[Trace, Sequence[Label]]) -> int:
    """Number of sigma labels in a trace."""
    return sum(1 for label in t if isinstance(label, Sigma))


def sigma_gap(t: Union[Trace, Sequence[Label]], first: Term, second: Term) -> Optional[int]:
    """
    Sigmas between the first observable broadcast of `first` and the
    first later observable broadcast of `second`.

    Returns:
        The count, or None when either broadcast is missing.
    """
    first, second = normalize(first), normalize(second)
    steps = list(t)
    for start, label in enumerate(steps):
        if isinstance(label, ObsBcast) and label.payload == first:
            for end in range(start + 1, len(steps)):
                later = steps[end]
                if isinstance(later, ObsBcast) and later.payload == second:
                    return sigma_count(steps[start:end])
            return None
    return None


def format_label(label: Label) -> str:
    return str(label)


def format_trace(t: Union[Trace, Sequence[Label]]) -> str:
    """One label per line, newline terminated."""
    return "".join(f"{format_label(label)}\n" for label in t)


def parse_label(line: str) -> Label:
    """
    Parse one trace line.

    Raises:
        DslSyntaxError: on an unknown label form.
    """
    from .dsl import parse_term

    text = line.strip()
    if text == "tau":
        return TAU
    if text == "sigma":
        return SIGMA
    if text.startswith("out "):
        body, sep, receivers = text[4:].rpartition(" > ")
        if not sep:
            raise DslSyntaxError(f"missing receiver set in {text!r}")
        return ObsBcast(parse_term(body), _parse_names(receivers))
    if text.startswith("in "):
        sender, _, body = text[3:].partition(" ")
        return Input(sender, parse_term(body))
    if text.startswith("bcast "):
        sender, _, rest = text[6:].partition(" ")
        body, _, receivers = rest.rpartition(" > ")
        return Bcast(sender, parse_term(body), _parse_names(receivers))
    raise DslSyntaxError(f"unknown trace label {text!r}")


def _parse_names(text: str) -> FrozenSet[str]:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise DslSyntaxError(f"expected a name set, got {text!r}")
    return frozenset(name.strip() for name in text[1:-1].split(",") if name.strip())


def parse_trace(text: str) -> Trace:
    """Parse the line-oriented trace format; blank lines and # comments are skipped."""
    steps = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            steps.append(parse_label(line))
        except DslSyntaxError as exc:
            raise DslSyntaxError(exc.reason, number, exc.column or 1)
    return Trace(tuple(steps))


def observe(label: Label, m_after: Optional[Network] = None) -> Label:
    """Hide broadcasts nobody outside hears; drop the sender name otherwise."""
    if isinstance(label, Bcast):
        if not label.receivers:
            return TAU
        return ObsBcast(label.payload, label.receivers)
    return label


# =============================================================================
# Engine
# =============================================================================

State = Tuple[Process, ...]


class Semantics:
    """
    Transition engine for one network.

    Args:
        network: The network to run.
        inputs: Messages environment senders may inject, keyed by sender.
        fuse: Nodes whose choice branches that start with a broadcast emit it
            directly, skipping the intermediate internal step.
        unfold_bound: Calls followed without reaching a head form.
    """

    def __init__(
        self,
        network: Network,
        inputs: Optional[Mapping[str, Iterable[Term]]] = None,
        fuse: Iterable[str] = (),
        unfold_bound: int = 32,
    ):
        self.network = network
        self.defs = network.defs
        nodes = sorted(network.nodes, key=lambda node: node.name)
        self.names: Tuple[str, ...] = tuple(node.name for node in nodes)
        self.nds = frozenset(self.names)
        self.neighbors: Dict[str, FrozenSet[str]] = {node.name: node.neighbors for node in nodes}
        self.receivers: Dict[str, Tuple[int, ...]] = {
            name: tuple(i for i, other in enumerate(self.names) if other in self.neighbors[name])
            for name in self.names
        }
        self.outside: Dict[str, FrozenSet[str]] = {
            name: self.neighbors[name] - self.nds for name in self.names
        }
        self.inputs: Dict[str, Tuple[Term, ...]] = {}
        for sender, messages in sorted((inputs or {}).items()):
            if sender in self.nds:
                logger.debug("ignoring input candidates for in-network sender %s", sender)
                continue
            self.inputs[sender] = tuple(sorted({normalize(w) for w in messages}, key=serialize))
        self.fuse = frozenset(fuse)
        self.unfold_bound = unfold_bound
        self._settled: Dict[Process, Tuple[Process, Process]] = {}
        self._moves: Dict[State, List[Tuple[Label, State]]] = {}
        self._observed: Dict[State, List[Tuple[Label, State]]] = {}
        self._closures: Dict[Tuple[State, int], Tuple[Tuple[State, ...], bool]] = {}

    # -- resolution ------------------------------------------------------------

    def settle(self, proc: Process) -> Tuple[Process, Process]:
        """
        Resolve matches, deductions and calls.

        Returns:
            (representative, head) where head is Nil, Bang, RcvTimeout,
            SumTimeout or Sleep, and representative is the last call passed
            through (or the head itself), used as the stored state.

        Raises:
            StructuralError: unguarded recursion or an open term in a test.
        """
        cached = self._settled.get(proc)
        if cached is not None:
            return cached
        current = proc
        representative = None
        unfolds = 0
        while True:
            if isinstance(current, Match):
                left, right = normalize(current.left), normalize(current.right)
                if not (is_message(left) and is_message(right)):
                    raise StructuralError(f"open term in match {serialize(left)} = {serialize(right)}")
                current = current.then if left == right else current.else_
            elif isinstance(current, Deduce):
                result = apply_rule(current.rule, current.premises)
                if result is None:
                    current = current.else_
                else:
                    current = substitute(current.then, current.binder, result)
            elif isinstance(current, Call):
                unfolds += 1
                if unfolds > self.unfold_bound:
                    raise StructuralError(f"unguarded recursion through {current.name}")
                representative = current
                current = unfold(current, self.defs)
            else:
                break
        result = (representative if representative is not None else current, current)
        self._settled[proc] = result
        return result

    def head(self, proc: Process) -> Process:
        return self.settle(proc)[1]

    def store(self, proc: Process) -> Process:
        return self.settle(proc)[0]

    # -- states ------------------------------------------------------------------

    def initial(self) -> State:
        by_name = {node.name: node for node in self.network.nodes}
        return tuple(self.store(by_name[name].proc) for name in self.names)

    def state_of(self, network: Network) -> State:
        by_name = {node.name: node for node in network.nodes}
        return tuple(self.store(by_name[name].proc) for name in self.names)

    def network_of(self, state: State) -> Network:
        return Network(
            tuple(Node(name, proc, self.neighbors[name]) for name, proc in zip(self.names, state)),
            self.defs,
        )

    # -- transitions -------------------------------------------------------------

    def transitions(self, state: State) -> List[Tuple[Label, State]]:
        """Every raw transition of the SOS rules from `state`."""
        cached = self._moves.get(state)
        if cached is not None:
            return cached
        heads = [self.head(proc) for proc in state]
        moves: List[Tuple[Label, State]] = []
        for index, name in enumerate(self.names):
            current = heads[index]
            if isinstance(current, Bang):
                moves.extend(self._broadcast(state, heads, index, current))
            elif isinstance(current, SumTimeout):
                for branch in current.branches:
                    if name in self.fuse:
                        branch_head = self.head(branch)
                        if isinstance(branch_head, Bang):
                            moves.extend(self._broadcast(state, heads, index, branch_head))
                            continue
                    moves.append((TAU, _replace(state, index, self.store(branch))))
        for sender, messages in self.inputs.items():
            listeners = tuple(i for i, name in enumerate(self.names) if sender in self.neighbors[name])
            for w in messages:
                for successor in self._receptions(state, heads, listeners, w, None):
                    moves.append((Input(sender, w), successor))
        successor = self.sigma_successor(state, heads)
        if successor is not None:
            moves.append((SIGMA, successor))
        self._moves[state] = moves
        return moves

    def _broadcast(self, state: State, heads: List[Process], index: int, bang: Bang):
        payload = normalize(bang.payload)
        if not is_message(payload):
            raise StructuralError(f"broadcast of open term {serialize(payload)}")
        name = self.names[index]
        label = Bcast(name, payload, self.outside[name])
        sender_state = _replace(state, index, self.store(bang.cont))
        if name in self.fuse:
            # a fused sender that nobody hears only loops back to itself
            if not any(isinstance(heads[i], RcvTimeout) for i in self.receivers[name]):
                return
            for successor in self._receptions(sender_state, heads, self.receivers[name], payload, index, lossy=False):
                yield label, successor
            return
        for successor in self._receptions(sender_state, heads, self.receivers[name], payload, index):
            yield label, successor

    def _receptions(self, state: State, heads, listeners, w: Term, sender: Optional[int], lossy: bool = True):
        """Every combination of receive-or-miss among listening nodes; only full delivery when not lossy."""
        ready = [i for i in listeners if i != sender and isinstance(heads[i], RcvTimeout)]
        options = []
        for i in ready:
            received = self.store(substitute(heads[i].body, heads[i].binder, w))
            options.append(((i, received), None) if lossy else ((i, received),))
        for choice in product(*options):
            successor = list(state)
            for picked in choice:
                if picked is not None:
                    i, received = picked
                    successor[i] = received
            yield tuple(successor)

    def sigma_successor(self, state: State, heads: Optional[List[Process]] = None) -> Optional[State]:
        """The unique sigma successor, or None under maximal progress."""
        if heads is None:
            heads = [self.head(proc) for proc in state]
        successor = []
        for current in heads:
            if isinstance(current, Bang):
                return None
            if isinstance(current, Nil):
                successor.append(NIL)
            elif isinstance(current, Sleep):
                successor.append(self.store(current.cont))
            elif isinstance(current, (RcvTimeout, SumTimeout)):
                successor.append(self.store(current.timeout))
            else:
                raise StructuralError(f"unexpected head {current!r}")
        return tuple(successor)

    def observed(self, state: State) -> List[Tuple[Label, State]]:
        cached = self._observed.get(state)
        if cached is None:
            cached = [(observe(label), successor) for label, successor in self.transitions(state)]
            self._observed[state] = cached
        return cached

    # -- weak transitions ----------------------------------------------------------

    def tau_closure(self, state: State, bound: int) -> Tuple[Tuple[State, ...], bool]:
        """
        States reachable by observed tau steps, in discovery order.

        Returns:
            (states, truncated) where truncated means a path longer than
            `bound` was cut.
        """
        cached = self._closures.get((state, bound))
        if cached is not None:
            return cached
        seen = {state: None}
        frontier = [state]
        truncated = False
        depth = 0
        while frontier:
            if depth >= bound:
                truncated = any(
                    isinstance(label, Tau) and successor not in seen
                    for current in frontier for label, successor in self.observed(current)
                )
                break
            next_frontier = []
            for current in frontier:
                for label, successor in self.observed(current):
                    if isinstance(label, Tau) and successor not in seen:
                        seen[successor] = None
                        next_frontier.append(successor)
            frontier = next_frontier
            depth += 1
        if truncated:
            logger.warning("tau-closure truncated at %d steps", bound)
        result = (tuple(seen), truncated)
        self._closures[(state, bound)] = result
        return result

    def weak(self, state: State, label: Label, bound: int) -> Tuple[Tuple[State, ...], bool]:
        """States reached by a weak `label` move (tau: the closure), in discovery order."""
        before, truncated = self.tau_closure(state, bound)
        if isinstance(label, Tau):
            return before, truncated
        result: Dict[State, None] = {}
        for current in before:
            for observed, successor in self.observed(current):
                if observed == label:
                    after, cut = self.tau_closure(successor, bound)
                    result.update(dict.fromkeys(after))
                    truncated = truncated or cut
        return tuple(result), truncated


def _replace(state: State, index: int, proc: Process) -> State:
    return state[:index] + (proc,) + state[index + 1:]


# =============================================================================
# Network-level operations
# =============================================================================

def step(m: Network, inputs: Optional[Mapping[str, Iterable[Term]]] = None) -> List[Tuple[Label, Network]]:
    """
    Successors of a network under the SOS rules.

    Returns:
        Distinct (raw label, successor network) pairs.
    """
    semantics = Semantics(m, inputs)
    seen = set()
    result = []
    for label, successor in semantics.transitions(semantics.initial()):
        if (label, successor) in seen:
            continue
        seen.add((label, successor))
        result.append((label, semantics.network_of(successor)))
    return result


@dataclass
class WeakResult:
    """Networks reached by weak steps, with the tau-closure truncation flag."""
    networks: List[Network]
    truncated: bool = False

    def __bool__(self) -> bool:
        return bool(self.networks)

    def __len__(self) -> int:
        return len(self.networks)


def weak_step(
    m: Network,
    a: Label,
    bound: int = 64,
    inputs: Optional[Mapping[str, Iterable[Term]]] = None,
) -> WeakResult:
    """Networks reachable by one weak `a` step (tau: zero or more tau steps)."""
    return run_trace(m, Trace((a,)), bound, inputs)


def run_trace(
    m: Network,
    t: Union[Trace, Sequence[Label]],
    bound: int = 64,
    inputs: Optional[Mapping[str, Iterable[Term]]] = None,
    fuse: Iterable[str] = (),
) -> WeakResult:
    """
    Execute a trace as a chain of weak steps.

    Returns:
        The reachable end networks; empty when the trace is not executable.
    """
    semantics = Semantics(m, inputs, fuse)
    states, truncated = run_states(semantics, t, bound)
    return WeakResult([semantics.network_of(state) for state in states], truncated)


def run_states(
    semantics: Semantics,
    t: Union[Trace, Sequence[Label]],
    bound: int
) -> Tuple[Tuple[State, ...], bool]:
    """Run a trace on engine states; the result keeps discovery order."""
    states: Tuple[State, ...] = (semantics.initial(),)
    truncated = False
    for label in t:
        reached: Dict[State, None] = {}
        for state in states:
            after, cut = semantics.weak(state, label, bound)
            reached.update(dict.fromkeys(after))
            truncated = truncated or cut
        states = tuple(reached)
        if not states:
            break
    return states, truncated


# =============================================================================
# Exploration
# =============================================================================

@dataclass
class StateGraph:
    """Explored fragment of a network's observed transition graph."""
    semantics: Semantics
    states: List[State] = field(default_factory=list)
    depth: List[int] = field(default_factory=list)
    edges: List[Tuple[int, Label, int]] = field(default_factory=list)
    initial: int = 0
    complete: bool = True
    max_sigma: int = 0

    def network(self, index: int) -> Network:
        return self.semantics.network_of(self.states[index])

    def successors(self, index: int) -> List[Tuple[Label, int]]:
        return [(label, dst) for src, label, dst in self.edges if src == index]

    def to_dot(self) -> str:
        """Graphviz rendering; node ids are state numbers."""
        lines = ["digraph lts {", "  rankdir=LR;"]
        for index in range(len(self.states)):
            shape = "doublecircle" if index == self.initial else "circle"
            lines.append(f'  s{index} [label="{index}" shape={shape}];')
        for src, label, dst in self.edges:
            text = format_label(label).replace('"', '\\"')
            lines.append(f'  s{src} -> s{dst} [label="{text}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def maximal_paths(self, limit: int = 100000) -> List[List[Label]]:
        """
        Label sequences of simple paths from the initial state that end at a
        state whose successors are all already on the path or beyond the
        explored depth.
        """
        adjacency: Dict[int, List[Tuple[Label, int]]] = {}
        for src, label, dst in self.edges:
            adjacency.setdefault(src, []).append((label, dst))
        paths: List[List[Label]] = []
        stack = [(self.initial, [], frozenset({self.initial}))]
        while stack and len(paths) < limit:
            current, labels, visited = stack.pop()
            extended = False
            for label, dst in adjacency.get(current, ()):
                if dst in visited:
                    continue
                extended = True
                stack.append((dst, labels + [label], visited | {dst}))
            if not extended:
                paths.append(labels)
        return paths


def explore(
    m: Network,
    max_sigma: int,
    inputs: Optional[Mapping[str, Iterable[Term]]] = None,
    state_budget: int = 200000,
    fuse: Iterable[str] = (),
    semantics: Optional[Semantics] = None,
) -> StateGraph:
    """
    Breadth-first exploration up to `max_sigma` sigma layers.

    States first reached after `max_sigma` sigmas are recorded but not
    expanded. State numbers follow discovery order, which is deterministic.
    """
    semantics = semantics or Semantics(m, inputs, fuse)
    graph = StateGraph(semantics, max_sigma=max_sigma)
    index: Dict[State, int] = {}

    def intern(state: State, depth: int) -> int:
        number = index.get(state)
        if number is None:
            number = len(graph.states)
            index[state] = number
            graph.states.append(state)
            graph.depth.append(depth)
        return number

    layer = [intern(semantics.initial(), 0)]
    for depth in range(max_sigma + 1):
        queue = deque(layer)
        expanded = set(layer)
        next_layer = []
        while queue:
            current = queue.popleft()
            for label, successor in semantics.observed(graph.states[current]):
                is_new = successor not in index
                target_depth = depth + 1 if isinstance(label, Sigma) else depth
                target = intern(successor, target_depth)
                graph.edges.append((current, label, target))
                if not is_new:
                    continue
                if isinstance(label, Sigma):
                    next_layer.append(target)
                elif target not in expanded:
                    expanded.add(target)
                    queue.append(target)
            if len(graph.states) > state_budget:
                logger.warning("state budget %d exceeded; graph incomplete", state_budget)
                graph.complete = False
                return graph
        logger.debug("sigma layer %d: %d states", depth, len(graph.states))
        layer = next_layer
    return graph


# =============================================================================
# Time properties
# =============================================================================

def _instantaneous_depth(
    semantics: Semantics,
    state: State,
    limit: int,
    memo: Dict[State, int],
    active: Set[State],
) -> int:
    """Longest run of tau and broadcast steps from `state`, capped at limit + 1."""
    if state in memo:
        return memo[state]
    if state in active:
        return limit + 1
    active.add(state)
    depth = 0
    for label, successor in semantics.transitions(state):
        if isinstance(label, (Sigma, Input)):
            continue
        depth = max(depth, 1 + _instantaneous_depth(semantics, successor, limit, memo, active))
        if depth > limit:
            depth = limit + 1
            break
    active.discard(state)
    memo[state] = depth
    return depth


def time_property_violations(
    m: Network,
    max_sigma: int = 4,
    step_budget: int = 64,
    state_budget: int = 20000,
    semantics: Optional[Semantics] = None,
) -> Tuple[List[str], bool]:
    """
    Check the timing laws on every state reached within `max_sigma` sigmas.

    The laws are read off the transitions each state offers: at most one
    sigma successor, a sigma move exactly when no broadcast is enabled,
    well-formed successors, and no more than `step_budget` instantaneous
    steps before the next sigma.

    Returns:
        (violations, complete) where complete is False when the state
        budget cut the exploration short.
    """
    semantics = semantics or Semantics(m)
    graph = explore(m, max_sigma, state_budget=state_budget, semantics=semantics)
    violations: List[str] = []
    memo: Dict[State, int] = {}
    for number, state in enumerate(graph.states):
        if graph.depth[number] > max_sigma:
            continue
        moves = semantics.transitions(state)
        sigmas = {successor for label, successor in moves if isinstance(label, Sigma)}
        pending = any(isinstance(label, Bcast) for label, _ in moves)
        if len(sigmas) > 1:
            violations.append(f"state {number}: {len(sigmas)} sigma successors")
        if pending and sigmas:
            violations.append(f"state {number}: sigma while a broadcast is pending")
        if not pending and not sigmas:
            violations.append(f"state {number}: no sigma although nothing is pending")
        for label, successor in moves:
            broken = structural_violations(semantics.network_of(successor))
            if broken:
                violations.append(f"state {number}: {format_label(label)} leads to {broken[0]}")
                break
        if _instantaneous_depth(semantics, state, step_budget, memo, set()) > step_budget:
            violations.append(f"state {number}: more than {step_budget} instantaneous steps")
    return violations, graph.complete
