"""
Shared building blocks for the protocol encodings.

Each protocol module registers a builder returning a ProtocolInstance: the
system, its timed abstraction, the knowledge sequence, the attacker wiring
and, where one exists, the golden replay trace together with the payload
pairs whose sigma gap the abstraction bounds.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from ..equivalence import simulates
from ..errors import AtcwsError, RegressionError, UnknownProtocolError
from ..lts import (
    SIGMA,
    TAU,
    Bcast,
    Label,
    ObsBcast,
    Sigma,
    StateGraph,
    Tau,
    Trace,
    explore,
    format_label,
    run_trace,
    sigma_gap,
)
from ..messages import Atom, ChainKey, Term, Var, f_power, normalize
from ..models import Bounds, CheckReport, Verdict
from ..syntax import NIL, Bang, Call, Deduce, Match, Network, Node, Process, ProcessDef, RcvTimeout, Sleep
from ..tgndc import OBSERVER, AttackerWiring, KnowledgeSequence, TgndcPart, TgndcQuery, wire_observed

logger = logging.getLogger(__name__)

TICK = "Tick"
MAX_CHAIN = 64


# =============================================================================
# Term and process helpers
# =============================================================================

def tag(name: str) -> Atom:
    return Atom(name, "tag")


def node_name(name: str) -> Atom:
    return Atom(name, "node-name")


def chain_key(i: int, chain: str = "c") -> Term:
    """k_i of the chain; negative indices are images of k_0 under F."""
    if i >= 0:
        return ChainKey(chain, i)
    return f_power(ChainKey(chain, 0), -i)


def index_name(i: int) -> str:
    return f"m{-i}" if i < 0 else str(i)


def let(premises: Sequence[Term], rule: str, binder: str, then: Process, else_: Process = NIL) -> Deduce:
    return Deduce(tuple(premises), rule, binder, then, else_)


def sleep(proc: Process, times: int = 1) -> Process:
    for _ in range(times):
        proc = Sleep(proc)
    return proc


def call(name: str, *args: Term) -> Call:
    return Call(name, tuple(args))


def define(defs: Dict[str, ProcessDef], name: str, params: Sequence[str], body: Process) -> None:
    defs[name] = ProcessDef(name, tuple(params), body)


def tick_defs() -> Dict[str, ProcessDef]:
    """The process that only lets time pass."""
    return {TICK: ProcessDef(TICK, (), Sleep(Call(TICK)))}


def match_chain(subject: Term, cases: Sequence[Tuple[Term, Process]], default: Process = NIL) -> Process:
    """[subject=c1]P1, [subject=c2]P2, ... falling back to `default`."""
    proc = default
    for value, then in reversed(cases):
        proc = Match(subject, value, then, proc)
    return proc


def network(*nodes: Node, defs: Dict[str, ProcessDef]) -> Network:
    table = tick_defs()
    table.update(defs)
    return Network(tuple(nodes), table)


# =============================================================================
# Instances and the registry
# =============================================================================

@dataclass
class ProtocolInstance:
    """A protocol at fixed parameters with everything the checks need."""
    name: str
    variant: str
    params: Dict[str, int]
    system: Network
    abstraction: Network
    knowledge: KnowledgeSequence
    wiring: AttackerWiring
    parts: Tuple[TgndcPart, ...] = ()
    expected: Optional[Trace] = None
    gap_pairs: Tuple[Tuple[Term, Term], ...] = ()
    claimed_gap: int = 2
    checked_property: str = "integrity"
    extra: Dict[str, Network] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    @property
    def observed(self) -> FrozenSet[str]:
        return self.wiring.observed

    @property
    def networks(self) -> Dict[str, Network]:
        """Every named network of the instance: system, abstraction, the scripted attack and parts."""
        result = {
            "system": self.system,
            "abstraction": self.abstraction,
            "attacked": attacked_by_script(self),
        }
        for part in self.parts:
            result[part.name] = part.network
            result[f"{part.name}_spec"] = part.spec
        result.update(self.extra)
        return result

    def query(self, bounds: Bounds) -> TgndcQuery:
        """The whole-system criterion against the abstraction."""
        return TgndcQuery(self.system, self.abstraction, self.wiring, self.knowledge, bounds, self.title)

    @property
    def title(self) -> str:
        return f"{self.name}/{self.variant}"


Builder = Callable[..., ProtocolInstance]


@dataclass(frozen=True)
class ProtocolEntry:
    name: str
    variants: Tuple[str, ...]
    summary: str
    builder: Builder
    attack_variant: Optional[str] = None
    defaults: Tuple[Tuple[str, int], ...] = ()


_REGISTRY: Dict[str, ProtocolEntry] = {}


def register(
    name: str,
    variants: Sequence[str],
    summary: str,
    attack_variant: Optional[str] = None,
    **defaults: int,
) -> Callable[[Builder], Builder]:
    """Decorator adding a builder `fn(variant, **params)` to the registry."""
    def decorator(fn: Builder) -> Builder:
        _REGISTRY[name] = ProtocolEntry(
            name, tuple(variants), summary, fn, attack_variant, tuple(sorted(defaults.items()))
        )
        return fn
    return decorator


def entries() -> List[ProtocolEntry]:
    return [_REGISTRY[name] for name in sorted(_REGISTRY)]


def entry(name: str) -> ProtocolEntry:
    if name not in _REGISTRY:
        raise UnknownProtocolError(f"unknown protocol {name}; known: {', '.join(sorted(_REGISTRY))}")
    return _REGISTRY[name]


def list_protocols() -> List[str]:
    return [item.name for item in entries()]


def check_params(params: Dict[str, int]) -> None:
    """
    Raises:
        AtcwsError: if a size parameter is out of the supported range.
    """
    for key, value in params.items():
        if not isinstance(value, int) or isinstance(value, bool):
            raise AtcwsError(f"parameter {key} must be an integer")
        if value < 1:
            raise AtcwsError(f"parameter {key} must be at least 1, got {value}")
        if value > MAX_CHAIN:
            raise AtcwsError(f"parameter {key} is capped at {MAX_CHAIN}, got {value}")


def build(name: str, variant: Optional[str] = None, **params: int) -> ProtocolInstance:
    """
    Build a registered protocol.

    Args:
        name: Protocol name, see list_protocols().
        variant: One of the protocol's variants; the first one when omitted.
        **params: Size parameters overriding the protocol defaults.

    Raises:
        UnknownProtocolError: for an unknown name or variant.
        AtcwsError: for an unknown or out-of-range parameter.
    """
    item = entry(name)
    variant = variant or item.variants[0]
    if variant not in item.variants:
        raise UnknownProtocolError(
            f"protocol {name} has no variant {variant}; known: {', '.join(item.variants)}"
        )
    merged = dict(item.defaults)
    unknown = set(params) - set(merged)
    if unknown:
        raise AtcwsError(f"protocol {name} takes no parameter {sorted(unknown)[0]}")
    merged.update(params)
    check_params(merged)
    logger.info("building %s/%s with %s", name, variant, merged)
    return item.builder(variant, **merged)


# =============================================================================
# Scripted replay attackers
# =============================================================================

SCRIPTED_PEERS = {
    "mutesla-boot": ("m", "bs"),
    "mutesla-auth": ("m1", "bs"),
    "leap": ("m", "r"),
    "lisp": ("m", "kl"),
}


def scripted_attacker(name: str) -> Network:
    """
    The two colluding replay nodes a[X] and b[Y].

    X forwards the first message it hears from m one slot later; Y does the
    same for the peer one slot behind. For LiSP X starts listening two slots
    late.
    """
    if name not in SCRIPTED_PEERS:
        raise UnknownProtocolError(f"no scripted attacker for {name}")
    honest, peer = SCRIPTED_PEERS[name]
    relay_x = _relay("x")
    if name == "lisp":
        relay_x = sleep(relay_x, 2)
    defs = {
        "X": ProcessDef("X", (), relay_x),
        "Y": ProcessDef("Y", (), Sleep(_relay("y"))),
    }
    return Network(
        (
            Node("a", Call("X"), frozenset({honest, "b"})),
            Node("b", Call("Y"), frozenset({peer, "a"})),
        ),
        defs,
    )


def _relay(binder: str) -> Process:
    return RcvTimeout(binder, Sleep(Bang(Var(binder), NIL)), NIL)


# =============================================================================
# Gap analysis
# =============================================================================

def _payload(label: Label) -> Optional[Term]:
    if isinstance(label, (ObsBcast, Bcast)):
        return label.payload
    return None


def label_gaps(graph: StateGraph, first: Term, second: Term) -> Set[int]:
    """
    Sigma counts from a broadcast of `first` to a later broadcast of
    `second`, over every explored path.
    """
    first, second = normalize(first), normalize(second)
    adjacency: Dict[int, List[Tuple[Label, int]]] = {}
    for src, label, dst in graph.edges:
        adjacency.setdefault(src, []).append((label, dst))
    gaps: Set[int] = set()
    start = (graph.initial, None)
    seen = {start}
    queue = deque([start])
    while queue:
        state, counter = queue.popleft()
        for label, dst in adjacency.get(state, ()):
            payload = _payload(label)
            after = counter
            if counter is not None:
                if isinstance(label, Sigma):
                    after = counter + 1
                    if after > graph.max_sigma:
                        continue
                elif payload == second:
                    gaps.add(counter)
            if payload == first and counter is None:
                after = 0
            key = (dst, after)
            if key not in seen:
                seen.add(key)
                queue.append(key)
    return gaps


def abstraction_gaps(instance: ProtocolInstance, rounds: int = 3, state_budget: int = 200000) -> Set[int]:
    """Gaps the abstraction allows for the first `rounds` payload pairs."""
    graph = explore(instance.abstraction, 2 * rounds + 4, state_budget=state_budget)
    gaps: Set[int] = set()
    for first, second in instance.gap_pairs[:rounds]:
        gaps |= label_gaps(graph, first, second)
    return gaps


def system_gaps(
    instance: ProtocolInstance,
    max_sigma: int,
    rounds: int = 2,
    state_budget: int = 200000,
) -> Set[int]:
    """Gaps of the attacker-free system with every broadcast made observable."""
    names = instance.system.names()
    attackers = tuple(f"env_{n}" for n in names)
    wiring = AttackerWiring(names, attackers, frozenset(names))
    graph = explore(wire_observed(instance.system, wiring), max_sigma, state_budget=state_budget)
    gaps: Set[int] = set()
    for first, second in instance.gap_pairs[:rounds]:
        gaps |= label_gaps(graph, first, second)
    return gaps


# =============================================================================
# Replay attacks
# =============================================================================

def attacked_by_script(instance: ProtocolInstance) -> Network:
    """The system, observed everywhere, composed with the scripted attackers."""
    honest, peer = SCRIPTED_PEERS[instance.name]
    attacker_of = {honest: "a", peer: "b"}
    nodes = []
    for node in instance.system.nodes:
        extra = {attacker_of[node.name]} if node.name in attacker_of else set()
        nodes.append(Node(node.name, node.proc, node.neighbors | extra | {OBSERVER}))
    return instance.system.with_nodes(nodes).compose(scripted_attacker(instance.name))


def replay_attack(
    name: str,
    max_sigma: int = 10,
    tau_bound: int = 64,
    state_budget: int = 200000,
    **params: int,
) -> CheckReport:
    """
    Replay the scripted attack on a protocol.

    The golden trace must run on the attacked system and be refused by the
    abstraction; its gap is then compared with the claimed bound. Without a
    golden trace the attacked system is checked against the abstraction.

    Raises:
        UnknownProtocolError: for an unknown protocol.
        RegressionError: if the golden trace no longer behaves as recorded.
    """
    item = entry(name)
    if item.attack_variant is None:
        raise UnknownProtocolError(f"no replay attack is defined for {name}")
    instance = build(name, item.attack_variant, **params)
    attacked = attacked_by_script(instance)
    bounds = Bounds(max_sigma=max_sigma)
    if instance.expected is None:
        result = simulates(instance.abstraction, attacked, max_sigma, tau_bound=tau_bound,
                           state_budget=state_budget)
        evidence = [f"explored {result.explored_pairs} pairs"]
        if result.holds:
            evidence.insert(0, "scripted replays are rejected")
        return CheckReport(
            check="attack", subject=instance.title, verdict=result.verdict, bounds=bounds,
            evidence=evidence, notes=list(result.notes) + list(instance.notes), traces=result.traces("attack"),
        )

    ran = run_trace(attacked, instance.expected, tau_bound)
    if not ran:
        raise RegressionError(f"golden trace for {name} does not replay on the attacked system")
    if run_trace(instance.abstraction, instance.expected, tau_bound):
        raise RegressionError(f"the abstraction of {name} accepts the golden trace")
    first, second = instance.gap_pairs[0]
    gap = sigma_gap(instance.expected, first, second)
    allowed = abstraction_gaps(instance, state_budget=state_budget)
    bound = max(allowed) if allowed else instance.claimed_gap
    if bound != instance.claimed_gap:
        logger.warning("abstraction of %s allows gap %d, claimed %d", name, bound, instance.claimed_gap)
    verdict = Verdict.FAILS if gap is not None and gap > bound else Verdict.HOLDS
    evidence = [
        f"{instance.checked_property} gap {gap} > {bound}" if verdict == Verdict.FAILS
        else f"{instance.checked_property} gap {gap} <= {bound}",
        f"abstraction gaps: {sorted(allowed)}",
        "golden trace runs on the attacked system",
        "golden trace is refused by the abstraction",
    ]
    if ran.truncated:
        evidence.append("tau-closure truncated while replaying")
    return CheckReport(
        check="attack",
        subject=instance.title,
        verdict=verdict,
        bounds=bounds,
        evidence=evidence,
        notes=list(instance.notes),
        traces={"attack": [format_label(label) for label in instance.expected]},
    )


def observed_trace(*steps) -> Trace:
    """Trace from payloads, SIGMA and TAU; payloads are heard by the observer."""
    labels = []
    for step in steps:
        if isinstance(step, (Sigma, Tau)):
            labels.append(step)
        else:
            labels.append(ObsBcast(normalize(step), frozenset({OBSERVER})))
    return Trace(tuple(labels))

