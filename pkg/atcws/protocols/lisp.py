"""
LiSP re-keying: a node m requests the current key from the key server.

The key listener kl answers RequestKey with InitKey carrying the key
k_{s+i} encrypted under kKSm together with its hash. The key distributor
kd periodically broadcasts UpdateKey with the next buffered key encrypted
under the current one. m keeps s keys and checks every new key against the
oldest one through F.
"""

from typing import Dict, List

from ..lts import SIGMA, TAU
from ..messages import Atom, Term, Var, enc, f_power, hash_, pair
from ..syntax import Bang, Call, Match, Node, Process, ProcessDef, RcvTimeout, SumTimeout
from ..tgndc import AttackerWiring, OBSERVER, derive_knowledge_sequence
from .common import (
    TICK,
    ProtocolInstance,
    call,
    chain_key,
    define,
    let,
    network,
    node_name,
    observed_trace,
    register,
    sleep,
    tag,
)

NODE = "m"
LISTENER = "kl"
DISTRIBUTOR = "kd"
SERVER_KEY = Atom("kKSm", "base-key")
REQUEST_KEY = tag("RequestKey")
INIT_KEY = tag("InitKey")
UPDATE_KEY = tag("UpdateKey")
AUTH = tag("auth")

v = Var

DISCREPANCY = (
    "the attack is usually described with four sigma steps between the "
    "InitKey message and its acceptance; the replayed trace needs three"
)


def key_request() -> Term:
    return pair(REQUEST_KEY, node_name(NODE))


def init_key(i: int, s: int) -> Term:
    """kl's answer to the request served at listener step i."""
    key = chain_key(s + i)
    return pair(INIT_KEY, pair(enc(SERVER_KEY, key), hash_(key)))


def authenticated(x: int, s: int) -> Term:
    return pair(AUTH, chain_key(s + x))


def _node(defs: Dict[str, ProcessDef], s: int, announce: bool) -> None:
    """m's definitions; the announcing family is suffixed with p."""
    x = "p" if announce else ""
    define(defs, f"Z{x}", (), let(
        [REQUEST_KEY, node_name(NODE)], "pair", "r",
        Bang(v("r"), sleep(RcvTimeout("q", call(f"T{x}", v("q")), call(f"Z{x}"))))))
    back = sleep(call(f"Z{x}"))
    start = call(f"R{x}_{s - 1}", f_power(v("k"), s - 1), v("k"))
    if announce:
        install = sleep(let([AUTH, v("k")], "pair", "a", Bang(v("a"), sleep(start))))
    else:
        install = sleep(start, 2)
    check = let([v("k")], "hash", "h2", Match(v("h"), v("h2"), install, back), back)
    body = let([v("q")], "fst", "q1", Match(
        v("q1"), INIT_KEY,
        let([v("q")], "snd", "q2", let([v("q2")], "fst", "w", let(
            [v("q2")], "snd", "h", let([SERVER_KEY, v("w")], "dec", "k", check, back),
            back), back), back),
        back), back)
    define(defs, f"T{x}", ("q",), body)

    for l in range(s):
        retry = sleep(call(f"F{x}_{l}", v("kc"), v("kl")))
        update = let([v("u")], "snd", "u2", let(
            [v("kc"), v("u2")], "dec", "k", Match(
                f_power(v("k"), s - l), v("kl"), sleep(start, 2), retry), retry), retry)
        define(defs, f"E{x}_{l}", ("u", "kc", "kl"), let([v("u")], "fst", "u1", Match(
            v("u1"), UPDATE_KEY, update, retry), retry))
        define(defs, f"R{x}_{l}", ("kc", "kl"), RcvTimeout(
            "u", call(f"E{x}_{l}", v("u"), v("kc"), v("kl")), call(f"F{x}_{l}", v("kc"), v("kl"))))
        if l == 0:
            fallback: Process = call(f"Z{x}")
        else:
            fallback = sleep(call(f"R{x}_{l - 1}", f_power(v("kl"), l - 1), v("kl")))
        define(defs, f"F{x}_{l}", ("kc", "kl"), fallback)


def _listener(defs: Dict[str, ProcessDef], s: int, steps: int) -> None:
    for i in range(steps):
        define(defs, f"L_{i}", (), RcvTimeout(
            "r", call(f"I_{i + 1}", v("r")), sleep(call(f"L_{i + 1}"))))
        back = sleep(call(f"L_{i + 1}"), 2)
        key = chain_key(s + i + 1)
        serve = let([v("r")], "snd", "m", let(
            [SERVER_KEY, key], "enc", "w", let(
                [key], "hash", "h", let(
                    [v("w"), v("h")], "pair", "ri", let(
                        [INIT_KEY, v("ri")], "pair", "q",
                        sleep(Bang(v("q"), sleep(call(f"L_{i + 1}")))))))), back)
        define(defs, f"I_{i + 1}", ("r",), let([v("r")], "fst", "r1", Match(
            v("r1"), REQUEST_KEY, serve, back), back))
    define(defs, f"L_{steps}", (), Call(TICK))


def _distributor(defs: Dict[str, ProcessDef], s: int, steps: int) -> None:
    define(defs, "D_0", (), sleep(call("D_1")))
    for i in range(1, steps + 1):
        define(defs, f"D_{i}", (), let(
            [chain_key(i), chain_key(s + i)], "enc", "t", let(
                [UPDATE_KEY, v("t")], "pair", "u", Bang(v("u"), sleep(call(f"D_{i + 1}"), 2)))))
    define(defs, f"D_{steps + 1}", (), Call(TICK))


def _abstraction(defs: Dict[str, ProcessDef], s: int, rounds: int) -> None:
    """
    Lh_i runs at slot 2i and may serve key i+1 there; Zh_i asks at slot 2i
    and may accept that key two slots later. After an acceptance m waits out
    its s buffered keys and asks again at the matching Zh.
    """
    for i in range(rounds + 1):
        define(defs, f"Lh_{i}", (), SumTimeout(
            (Bang(init_key(i + 1, s), sleep(call(f"Lh_{i + 1}"), 2)),),
            sleep(call(f"Lh_{i + 1}"))))
        accept = sleep(Bang(authenticated(i + 1, s), sleep(call(f"Zh_{i + 1 + s}"), 2 * s)))
        define(defs, f"Zh_{i}", (), Bang(key_request(), sleep(SumTimeout((accept,), call(f"Zh_{i + 1}")))))
    define(defs, f"Lh_{rounds + 1}", (), Call(TICK))
    for i in range(rounds + 1, rounds + s + 2):
        define(defs, f"Zh_{i}", (), Call(TICK))


@register(
    "lisp",
    ("integrity",),
    "LiSP key request from node m to the key listener kl",
    attack_variant="integrity",
    n=8,
    s=3,
)
def build_lisp(variant: str, n: int, s: int) -> ProtocolInstance:
    horizon = 2 * n
    steps = n + 1
    defs: Dict[str, ProcessDef] = {}
    _node(defs, s, announce=True)
    _listener(defs, s, steps)
    _abstraction(defs, s, n)

    m_node = Node(NODE, call("Zp"), frozenset({LISTENER}))
    kl_node = Node(LISTENER, call("L_0"), frozenset({NODE}))
    system = network(m_node, kl_node, defs=defs)
    abstraction = network(
        Node(NODE, call("Zh_0"), frozenset({OBSERVER})),
        Node(LISTENER, call("Lh_0"), frozenset({OBSERVER})),
        defs=defs,
    )

    base: Dict[str, ProcessDef] = {}
    _node(base, s, announce=False)
    _listener(base, s, steps)
    _distributor(base, s, steps)
    full = network(
        Node(NODE, call("Z"), frozenset({DISTRIBUTOR, LISTENER})),
        Node(DISTRIBUTOR, call("D_0"), frozenset({NODE})),
        Node(LISTENER, call("L_0"), frozenset({NODE})),
        defs=base,
    )

    wiring = AttackerWiring((NODE, LISTENER), ("a", "b"), frozenset({NODE, LISTENER}))
    names: List[Term] = [node_name(NODE), node_name(LISTENER)]
    knowledge = derive_knowledge_sequence(system, wiring, horizon + 1, initial=names)
    expected = observed_trace(
        key_request(), SIGMA, init_key(1, s), SIGMA, TAU, key_request(), SIGMA, TAU, SIGMA,
        authenticated(1, s),
    )
    return ProtocolInstance(
        name="lisp",
        variant=variant,
        params={"n": n, "s": s},
        system=system,
        abstraction=abstraction,
        knowledge=knowledge,
        wiring=wiring,
        expected=expected,
        gap_pairs=tuple((init_key(x, s), authenticated(x, s)) for x in range(1, n + 1)),
        claimed_gap=2,
        checked_property=variant,
        extra={"full": full},
        notes=(DISCREPANCY,),
    )
