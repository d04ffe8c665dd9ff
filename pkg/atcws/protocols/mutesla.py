"""
μTESLA: key chain bootstrapping and delayed-key authenticated broadcast.

The base station bs answers a nonce-bearing request from node m with the
current interval index and the last disclosed chain key, MACed under the
key bs shares with m. Afterwards bs sends packets MACed with k_i in
interval i and discloses k_{i-1}; receivers buffer a packet until its key
arrives and check the key against the last authenticated one through F.

Intervals last two slots: interval i covers slots 2i-2 and 2i-1.
"""

from typing import Dict, List, Tuple

from ..lts import SIGMA, TAU
from ..messages import BOT, Atom, Term, Var, f_power, mac, number, pair, prf
from ..syntax import Bang, Call, Match, Node, Process, ProcessDef, RcvTimeout, SumTimeout
from ..tgndc import OBSERVER, AttackerWiring, KnowledgeSequence, TgndcPart
from .common import (
    TICK,
    ProtocolInstance,
    call,
    chain_key,
    define,
    index_name,
    let,
    match_chain,
    network,
    node_name,
    observed_trace,
    register,
    sleep,
    tag,
)

BASE = "bs"
NODE = "m"
MASTER_KEY = Atom("kBSm", "base-key")
NONCE_SEED = Atom("n0", "nonce")
REQ = tag("req")
END = tag("end")
AUTH = tag("auth")

v = Var


# =============================================================================
# Messages
# =============================================================================

def nonce(j: int) -> Term:
    """n_j = prf(m, n_{j-1}), the nonce of m's j-th request."""
    term: Term = NONCE_SEED
    for _ in range(j):
        term = prf(node_name(NODE), term)
    return term


def request(j: int) -> Term:
    return pair(REQ, pair(node_name(NODE), nonce(j)))


def interval_info(i: int) -> Term:
    return pair(number(i), chain_key(i - 1))


def reply(i: int, n: Term) -> Term:
    """bs's answer in interval i to a request carrying nonce n."""
    q = interval_info(i)
    return pair(q, mac(MASTER_KEY, pair(n, q)))


def payload(i: int) -> Atom:
    return Atom(f"q{i}")


def packet(i: int) -> Term:
    return pair(mac(chain_key(i), payload(i)), payload(i))


def authenticated(term: Term) -> Term:
    return pair(AUTH, term)


def receiver_name(i: int, l: int) -> str:
    return f"R_{index_name(i)}_{index_name(l)}"


# =============================================================================
# Receivers
# =============================================================================

def receiver_defs(starts: List[Tuple[int, int]], horizon: int, announce: bool) -> Dict[str, ProcessDef]:
    """
    R_{i,l}(r, kl): receive the packet of interval i while holding the
    previous packet r and the last authenticated key kl = k_l.

    With `announce` every authenticated packet is rebroadcast tagged auth.
    Intervals past `horizon` only let time pass.
    """
    defs: Dict[str, ProcessDef] = {}
    pending = list(starts)
    while pending:
        i, l = pending.pop()
        name = receiver_name(i, l)
        if name in defs:
            continue
        if i > horizon:
            define(defs, name, ("r", "kl"), Call(TICK))
            continue
        step = receiver_name(i + 1, l)
        fresh = receiver_name(i + 1, i - 1)
        pending.extend([(i + 1, l), (i + 1, i - 1)])

        define(defs, name, ("r", "kl"), RcvTimeout(
            "p",
            sleep(call(f"P_{index_name(i)}_{index_name(l)}", v("p"), v("r"), v("kl"))),
            call(f"Q_{index_name(i)}_{index_name(l)}", v("r"), v("kl")),
        ))
        define(defs, f"P_{index_name(i)}_{index_name(l)}", ("p", "r", "kl"), RcvTimeout(
            "k",
            call(f"T_{index_name(i)}_{index_name(l)}", v("p"), v("r"), v("kl"), v("k")),
            call(step, v("p"), v("kl")),
        ))
        define(defs, f"Q_{index_name(i)}_{index_name(l)}", ("r", "kl"), RcvTimeout(
            "k",
            call(f"T_{index_name(i)}_{index_name(l)}", BOT, v("r"), v("kl"), v("k")),
            call(step, v("r"), v("kl")),
        ))
        rejected = sleep(call(fresh, v("p"), v("k")))
        accepted = sleep(call(f"Z_{index_name(i + 1)}_{index_name(i - 1)}", v("p"), v("r"), v("k")))
        check_mac = let([v("r")], "fst", "u", let([v("r")], "snd", "q", let(
            [v("k"), v("q")], "mac", "u2",
            Match(v("u"), v("u2"), accepted, rejected), rejected), rejected), rejected)
        define(defs, f"T_{index_name(i)}_{index_name(l)}", ("p", "r", "kl", "k"), Match(
            f_power(v("k"), i - 1 - l), v("kl"), check_mac, sleep(call(step, v("p"), v("kl"))),
        ))
        resume = call(fresh, v("p"), v("kl"))
        if announce:
            body: Process = let([AUTH, v("r")], "pair", "t", Bang(v("t"), resume))
        else:
            body = resume
        define(defs, f"Z_{index_name(i + 1)}_{index_name(i - 1)}", ("p", "r", "kl"), body)
    return defs


# =============================================================================
# Bootstrapping
# =============================================================================

def _requester(defs: Dict[str, ProcessDef], attempts: int, intervals: int, announce: bool) -> None:
    for j in range(1, attempts + 1):
        define(defs, f"A_{j}", ("np",), let(
            [node_name(NODE), v("np")], "prf", "n", let(
                [node_name(NODE), v("n")], "pair", "t", let(
                    [REQ, v("t")], "pair", "p", Bang(v("p"), sleep(call(f"B_{j}", v("n"))))))))
        define(defs, f"B_{j}", ("n",), RcvTimeout(
            "w", call(f"C_{j}", v("w"), v("n")), call(f"A_{j + 1}", v("n"))))
        retry = sleep(call(f"A_{j + 1}", v("n")))
        dispatch = match_chain(v("i"), [
            (number(x), call(receiver_name(x + 1, x - 1), BOT, v("k"))) for x in range(1, intervals + 1)
        ])
        if announce:
            adopt = sleep(let([AUTH, v("n")], "pair", "t", Bang(v("t"), dispatch)))
        else:
            adopt = sleep(dispatch)
        body = let([v("w")], "fst", "q", let([v("w")], "snd", "h", let(
            [v("n"), v("q")], "pair", "r", let(
                [MASTER_KEY, v("r")], "mac", "h2", Match(
                    v("h"), v("h2"),
                    let([v("q")], "fst", "i", let([v("q")], "snd", "k", adopt, retry), retry),
                    retry), retry), retry), retry), retry)
        define(defs, f"C_{j}", ("w", "n"), body)
    define(defs, f"A_{attempts + 1}", ("np",), Call(TICK))


def _responder(defs: Dict[str, ProcessDef], intervals: int, confirm: bool) -> None:
    for i in range(1, intervals + 1):
        after = call(f"D_{i + 1}")
        define(defs, f"D_{i}", (), RcvTimeout("p", call(f"E_{i}", v("p")), sleep(after)))
        skip = sleep(after, 2)
        if confirm:
            finish = sleep(let([END, v("n")], "pair", "t", Bang(v("t"), after)))
        else:
            finish = sleep(after)
        answer = let([number(i), chain_key(i - 1)], "pair", "q", let(
            [v("n"), v("q")], "pair", "r", let(
                [MASTER_KEY, v("r")], "mac", "h", let(
                    [v("q"), v("h")], "pair", "w", sleep(Bang(v("w"), finish))))))
        body = let([v("p")], "fst", "p1", Match(
            v("p1"), REQ,
            let([v("p")], "snd", "t", let([v("t")], "fst", "m", let(
                [v("t")], "snd", "n", answer, skip), skip), skip),
            skip), skip)
        define(defs, f"E_{i}", ("p",), body)
    define(defs, f"D_{intervals + 1}", (), Call(TICK))


def _boot_abstraction(defs: Dict[str, ProcessDef], intervals: int, agreement: bool) -> None:
    """The requester gets its reply in the interval it asks, or asks again."""
    for i in range(1, intervals + 1):
        keep = call(receiver_name(i + 1, i - 1), BOT, chain_key(i - 1))
        if agreement:
            define(defs, f"Dh_{i}", (), SumTimeout(
                (sleep(Bang(reply(i, nonce(i)), sleep(Bang(pair(END, nonce(i)), call(f"Dh_{i + 1}"))))),),
                sleep(call(f"Dh_{i + 1}"))))
            adopt = sleep(keep)
            name = f"Ah_{i}"
        else:
            adopt = sleep(Bang(authenticated(nonce(i)), keep))
            name = f"Abar_{i}"
        nxt = f"Ah_{i + 1}" if agreement else f"Abar_{i + 1}"
        define(defs, name, (), Bang(request(i), sleep(SumTimeout((adopt,), call(nxt)))))
    for prefix in (("Ah", "Dh") if agreement else ("Abar",)):
        define(defs, f"{prefix}_{intervals + 1}", (), Call(TICK))


def boot_knowledge(intervals: int, confirm: bool = False, announce: bool = True) -> KnowledgeSequence:
    """
    Slot 0: names and the first request; odd slots: replies; even slots:
    next request and auth.

    bs answers any request it hears, so the reply slot of interval i also
    holds its answers to the earlier requests an attacker can replay, and
    with `confirm` its end messages for them.
    """
    deltas: List[List[Term]] = [[node_name(BASE), node_name(NODE), request(1)]]
    for slot in range(1, 2 * intervals + 2):
        j = slot // 2
        if slot % 2:
            deltas.append([reply(j + 1, nonce(x)) for x in range(1, j + 2)])
            continue
        delta = [request(j + 1)]
        if announce:
            delta.append(authenticated(nonce(j)))
        if confirm:
            delta.extend(pair(END, nonce(x)) for x in range(1, j + 1))
        deltas.append(delta)
    return KnowledgeSequence.from_deltas(deltas)


@register(
    "mutesla-boot",
    ("integrity", "agreement"),
    "μTESLA key chain bootstrapping between bs and m",
    attack_variant="agreement",
    n=8,
)
def build_boot(variant: str, n: int) -> ProtocolInstance:
    agreement = variant == "agreement"
    defs: Dict[str, ProcessDef] = {}
    _requester(defs, n, n, announce=not agreement)
    _responder(defs, n, confirm=agreement)
    receivers = receiver_defs([(x + 1, x - 1) for x in range(1, n + 1)], n + 1, announce=False)
    defs.update(receivers)
    _boot_abstraction(defs, n, agreement)

    bs_node = Node(BASE, call("D_1"), frozenset({NODE}))
    m_node = Node(NODE, call("A_1", NONCE_SEED), frozenset({BASE}))
    system = network(bs_node, m_node, defs=defs)
    observed = frozenset({BASE, NODE}) if agreement else frozenset({NODE})
    if agreement:
        abstraction = network(
            Node(BASE, call("Dh_1"), frozenset({OBSERVER})),
            Node(NODE, call("Ah_1"), frozenset({OBSERVER})),
            defs=defs,
        )
    else:
        abstraction = network(
            Node(BASE, call(TICK), frozenset()),
            Node(NODE, call("Abar_1"), frozenset({OBSERVER})),
            defs=defs,
        )
    parts: Tuple[TgndcPart, ...] = ()
    if not agreement:
        parts = (
            TgndcPart(BASE, network(bs_node, defs=defs), network(Node(BASE, call(TICK)), defs={}),
                      frozenset(), ("b",)),
            TgndcPart(NODE, network(m_node, defs=defs),
                      network(Node(NODE, call("Abar_1"), frozenset({OBSERVER})), defs=defs),
                      frozenset({NODE}), ("a",)),
        )
    expected = None
    gap_pairs: Tuple[Tuple[Term, Term], ...]
    if agreement:
        expected = observed_trace(
            request(1), SIGMA, TAU, SIGMA, TAU, request(2), SIGMA,
            reply(2, nonce(1)), SIGMA, pair(END, nonce(1)),
        )
        gap_pairs = tuple((request(i), pair(END, nonce(i))) for i in range(1, n + 1))
    else:
        gap_pairs = tuple((request(i), authenticated(nonce(i))) for i in range(1, n + 1))
    return ProtocolInstance(
        name="mutesla-boot",
        variant=variant,
        params={"n": n},
        system=system,
        abstraction=abstraction,
        knowledge=boot_knowledge(n, confirm=agreement, announce=not agreement),
        wiring=AttackerWiring((BASE, NODE), ("b", "a"), observed),
        parts=parts,
        expected=expected,
        gap_pairs=gap_pairs,
        claimed_gap=2,
        checked_property=variant,
    )


# =============================================================================
# Authenticated broadcast
# =============================================================================

def _sender(defs: Dict[str, ProcessDef], intervals: int) -> None:
    for i in range(1, intervals + 1):
        define(defs, f"S_{i}", (), let(
            [chain_key(i), payload(i)], "mac", "u", let(
                [v("u"), payload(i)], "pair", "p",
                Bang(v("p"), sleep(Bang(chain_key(i - 1), sleep(call(f"S_{i + 1}"))))))))
    define(defs, f"S_{intervals + 1}", (), Call(TICK))


def _receiver_abstraction(defs: Dict[str, ProcessDef], intervals: int) -> None:
    """Packet i may be announced at the start of interval i+1 and never later."""
    for i in range(1, intervals + 2):
        nxt = call(f"Rh_{i + 1}")
        define(defs, f"Rh_{i}", (), sleep(SumTimeout(
            (sleep(Bang(authenticated(packet(i - 1)), nxt)),), nxt)))
    define(defs, f"Rh_{intervals + 2}", (), Call(TICK))


def auth_knowledge(intervals: int, receivers: int) -> KnowledgeSequence:
    names = [node_name(BASE)] + [node_name(f"m{j}") for j in range(1, receivers + 1)]
    deltas: List[List[Term]] = [names + [packet(1)]]
    for slot in range(1, 2 * intervals + 4):
        j = slot // 2
        if slot % 2:
            deltas.append([chain_key(j)])
        else:
            deltas.append([packet(j + 1), authenticated(packet(j - 1))])
    return KnowledgeSequence.from_deltas(deltas)


@register(
    "mutesla-auth",
    ("integrity",),
    "μTESLA authenticated broadcast from bs to h receivers",
    attack_variant="integrity",
    n=8,
    h=2,
)
def build_auth(variant: str, n: int, h: int) -> ProtocolInstance:
    defs: Dict[str, ProcessDef] = {}
    _sender(defs, n)
    defs.update(receiver_defs([(1, -1)], n + 1, announce=True))
    _receiver_abstraction(defs, n)
    receivers = [f"m{j}" for j in range(1, h + 1)]
    start = call(receiver_name(1, -1), BOT, chain_key(-1))
    bs_node = Node(BASE, call("S_1"), frozenset(receivers))
    m_nodes = [Node(name, start, frozenset({BASE})) for name in receivers]
    system = network(bs_node, *m_nodes, defs=defs)
    bs_spec = Node(BASE, call("S_1"), frozenset({OBSERVER}))
    m_specs = [Node(name, call("Rh_1"), frozenset({OBSERVER})) for name in receivers]
    abstraction = network(bs_spec, *m_specs, defs=defs)
    attackers = [f"a{j}" for j in range(1, h + 1)]
    parts = (TgndcPart(BASE, network(bs_node, defs=defs), network(bs_spec, defs=defs),
                       frozenset({BASE}), ("b",)),) + tuple(
        TgndcPart(node.name, network(node, defs=defs), network(spec, defs=defs),
                  frozenset({node.name}), (attacker,))
        for node, spec, attacker in zip(m_nodes, m_specs, attackers)
    )
    return ProtocolInstance(
        name="mutesla-auth",
        variant=variant,
        params={"n": n, "h": h},
        system=system,
        abstraction=abstraction,
        knowledge=auth_knowledge(n, h),
        wiring=AttackerWiring(tuple([BASE] + receivers), tuple(["b"] + attackers),
                              frozenset([BASE] + receivers)),
        parts=parts,
        gap_pairs=tuple((packet(i), authenticated(packet(i))) for i in range(1, n + 1)),
        claimed_gap=4,
        checked_property="integrity",
    )
