"""
LEAP+ pairwise key establishment between a new node m and a neighbor r.

m broadcasts hello with a fresh nonce; r answers with its name and a MAC
of (r, nonce) under k_r = prf(kin, r). m recomputes k_r from the initial
key kin, checks the MAC and derives the pairwise key prf(k_r, m).
"""

from typing import Dict, List, Tuple

from ..lts import SIGMA, TAU
from ..messages import Atom, Term, Var, mac, pair, prf
from ..syntax import NIL, Bang, Call, Match, Node, ProcessDef, RcvTimeout, SumTimeout
from ..tgndc import OBSERVER, AttackerWiring, KnowledgeSequence, TgndcPart
from .common import TICK, ProtocolInstance, call, define, let, network, node_name, observed_trace, register, sleep, tag

NODE = "m"
PEER = "r"
INITIAL_KEY = Atom("kin", "base-key")
NONCE_SEED = Atom("n0", "nonce")
HELLO = tag("hello")
END = tag("end")
AUTH = tag("auth")

v = Var


def nonce(i: int) -> Term:
    """n_i = prf(n_{i-1}, m)."""
    term: Term = NONCE_SEED
    for _ in range(i):
        term = prf(term, node_name(NODE))
    return term


def peer_key() -> Term:
    return prf(INITIAL_KEY, node_name(PEER))


def hello(i: int) -> Term:
    return pair(HELLO, pair(node_name(NODE), nonce(i)))


def answer(n: Term) -> Term:
    """r's reply to a hello carrying nonce n."""
    return pair(node_name(PEER), mac(peer_key(), pair(node_name(PEER), n)))


def authenticated(i: int) -> Term:
    return pair(AUTH, pair(node_name(NODE), nonce(i)))


def confirmed(n: Term) -> Term:
    return pair(END, n)


def _initiator(defs: Dict[str, ProcessDef], attempts: int, announce: bool) -> None:
    for i in range(1, attempts + 1):
        define(defs, f"S_{i}", ("np",), let(
            [v("np"), node_name(NODE)], "prf", "n", let(
                [node_name(NODE), v("n")], "pair", "t", let(
                    [HELLO, v("t")], "pair", "p", Bang(v("p"), sleep(call(f"P_{i}", v("n"), v("t"))))))))
        define(defs, f"P_{i}", ("n", "t"), RcvTimeout(
            "q", call(f"V_{i}", v("q"), v("n"), v("t")), call(f"S_{i + 1}", v("n"))))
        retry = sleep(call(f"S_{i + 1}", v("n")))
        if announce:
            done = sleep(let([AUTH, v("t")], "pair", "a", Bang(v("a"), NIL)))
        else:
            done = sleep(NIL)
        derive = let([v("kr"), node_name(NODE)], "prf", "kmr", done, retry)
        body = let([v("q")], "fst", "r", let([v("q")], "snd", "h", let(
            [v("r"), v("n")], "pair", "t2", let(
                [INITIAL_KEY, v("r")], "prf", "kr", let(
                    [v("kr"), v("t2")], "mac", "h2",
                    Match(v("h2"), v("h"), derive, retry), retry), retry), retry), retry), retry)
        define(defs, f"V_{i}", ("q", "n", "t"), body)
    define(defs, f"S_{attempts + 1}", ("np",), Call(TICK))


def _responder(defs: Dict[str, ProcessDef], confirm: bool) -> None:
    again = sleep(call("R"), 2)
    if confirm:
        finish = sleep(let([END, v("n")], "pair", "e", Bang(v("e"), NIL)))
    else:
        finish = sleep(NIL)
    derive = let([v("kr"), v("m")], "prf", "kmr", finish, again)
    reply = let([node_name(PEER), v("n")], "pair", "t", let(
        [INITIAL_KEY, node_name(PEER)], "prf", "kr", let(
            [v("kr"), v("t")], "mac", "h", let(
                [node_name(PEER), v("h")], "pair", "q", sleep(Bang(v("q"), derive))))))
    body = let([v("p")], "fst", "p1", let([v("p")], "snd", "p2", Match(
        v("p1"), HELLO,
        let([v("p2")], "fst", "m", let([v("p2")], "snd", "n", reply, again), again),
        again), again), again)
    define(defs, "R", (), RcvTimeout("p", body, sleep(call("R"))))


def _abstraction(defs: Dict[str, ProcessDef], attempts: int, agreement: bool) -> None:
    """Each hello is answered within its interval or retried in the next one."""
    for i in range(1, attempts + 1):
        if agreement:
            define(defs, f"Sbar_{i}", (), Bang(hello(i), sleep(SumTimeout(
                (sleep(NIL),), call(f"Sbar_{i + 1}")))))
            define(defs, f"Rbar_{i}", (), SumTimeout(
                (sleep(Bang(answer(nonce(i)), sleep(Bang(confirmed(nonce(i)), NIL)))),),
                sleep(call(f"Rbar_{i + 1}"))))
        else:
            define(defs, f"Sh_{i}", (), Bang(hello(i), sleep(SumTimeout(
                (sleep(Bang(authenticated(i), NIL)),), call(f"Sh_{i + 1}")))))
    for prefix in (("Sbar", "Rbar") if agreement else ("Sh",)):
        define(defs, f"{prefix}_{attempts + 1}", (), Call(TICK))


def leap_knowledge(attempts: int, confirm: bool = False, announce: bool = True) -> KnowledgeSequence:
    deltas: List[List[Term]] = [[node_name(NODE), node_name(PEER), hello(1)]]
    for slot in range(1, 2 * attempts + 2):
        j = slot // 2
        if slot % 2:
            deltas.append([answer(nonce(j + 1))])
            continue
        delta = [hello(j + 1)]
        if announce:
            delta.append(authenticated(j))
        if confirm:
            delta.append(confirmed(nonce(j)))
        deltas.append(delta)
    return KnowledgeSequence.from_deltas(deltas)


@register(
    "leap",
    ("integrity", "agreement"),
    "LEAP+ pairwise key establishment between m and r",
    attack_variant="agreement",
    n=8,
)
def build_leap(variant: str, n: int) -> ProtocolInstance:
    agreement = variant == "agreement"
    defs: Dict[str, ProcessDef] = {}
    _initiator(defs, n, announce=not agreement)
    _responder(defs, confirm=agreement)
    _abstraction(defs, n, agreement)

    m_node = Node(NODE, call("S_1", NONCE_SEED), frozenset({PEER}))
    r_node = Node(PEER, call("R"), frozenset({NODE}))
    system = network(m_node, r_node, defs=defs)
    if agreement:
        abstraction = network(
            Node(NODE, call("Sbar_1"), frozenset({OBSERVER})),
            Node(PEER, call("Rbar_1"), frozenset({OBSERVER})),
            defs=defs,
        )
        observed = frozenset({NODE, PEER})
    else:
        abstraction = network(
            Node(NODE, call("Sh_1"), frozenset({OBSERVER})),
            Node(PEER, call(TICK), frozenset()),
            defs=defs,
        )
        observed = frozenset({NODE})
    parts: Tuple[TgndcPart, ...] = ()
    expected = None
    if agreement:
        expected = observed_trace(
            hello(1), SIGMA, TAU, SIGMA, TAU, hello(2), SIGMA, answer(nonce(1)), SIGMA, confirmed(nonce(1)),
        )
        gap_pairs = tuple((hello(i), confirmed(nonce(i))) for i in range(1, n + 1))
    else:
        parts = (
            TgndcPart(NODE, network(m_node, defs=defs),
                      network(Node(NODE, call("Sh_1"), frozenset({OBSERVER})), defs=defs),
                      frozenset({NODE}), ("a",)),
            TgndcPart(PEER, network(r_node, defs=defs), network(Node(PEER, call(TICK)), defs={}),
                      frozenset(), ("b",)),
        )
        gap_pairs = tuple((hello(i), authenticated(i)) for i in range(1, n + 1))
    return ProtocolInstance(
        name="leap",
        variant=variant,
        params={"n": n},
        system=system,
        abstraction=abstraction,
        knowledge=leap_knowledge(n, confirm=agreement, announce=not agreement),
        wiring=AttackerWiring((NODE, PEER), ("a", "b"), observed),
        parts=parts,
        expected=expected,
        gap_pairs=gap_pairs,
        claimed_gap=2,
        checked_property=variant,
    )
