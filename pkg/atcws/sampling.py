"""
Seeded random models for the property suites.

Generated processes only call definitions behind a sigma (after a sleep or
as a timeout continuation), so every sampled network is well-timed by
construction. Node graphs are connected and symmetric.
"""

import logging
import random
from typing import Dict, List, Optional, Sequence, Tuple

from .lts import time_property_violations
from .messages import Atom, Term, Var, hash_, mac, pair
from .models import CheckReport, Verdict
from .syntax import NIL, Bang, Call, Deduce, Match, Network, Node, Process, ProcessDef, RcvTimeout, Sleep, SumTimeout

logger = logging.getLogger(__name__)

ATOMS = (Atom("a"), Atom("b"), Atom("c"))
KEYS = (Atom("k1", "base-key"), Atom("k2", "base-key"))


def random_term(rng: random.Random, depth: int = 2, variables: Sequence[str] = ()) -> Term:
    """A term over a small atom set, drawing bound variables when given."""
    leaves: List[Term] = list(ATOMS) + [Var(name) for name in variables]
    if depth <= 0 or rng.random() < 0.4:
        return rng.choice(leaves)
    shape = rng.randrange(3)
    if shape == 0:
        return pair(random_term(rng, depth - 1, variables), random_term(rng, depth - 1, variables))
    if shape == 1:
        return mac(rng.choice(KEYS), random_term(rng, depth - 1, variables))
    return hash_(random_term(rng, depth - 1, variables))


class _ProcessSampler:
    """Draws processes whose calls are all time-guarded."""

    def __init__(self, rng: random.Random, targets: Sequence[str]):
        self.rng = rng
        self.targets = tuple(targets)
        self.fresh = 0

    def binder(self) -> str:
        self.fresh += 1
        return f"x{self.fresh}"

    def guarded(self, depth: int, variables: Tuple[str, ...]) -> Process:
        """A continuation reached only after a sigma."""
        if self.targets and self.rng.random() < 0.5:
            return Call(self.rng.choice(self.targets))
        return self.process(depth, variables)

    def process(self, depth: int, variables: Tuple[str, ...] = ()) -> Process:
        rng = self.rng
        if depth <= 0:
            return Sleep(Call(rng.choice(self.targets))) if self.targets and rng.random() < 0.5 else NIL
        shape = rng.randrange(7)
        if shape == 0:
            return Bang(random_term(rng, 1, variables), self.process(depth - 1, variables))
        if shape == 1:
            x = self.binder()
            return RcvTimeout(x, self.process(depth - 1, variables + (x,)), self.guarded(depth - 1, variables))
        if shape == 2:
            branches = tuple(self.process(depth - 1, variables) for _ in range(rng.randint(1, 2)))
            return SumTimeout(branches, self.guarded(depth - 1, variables))
        if shape == 3:
            return Sleep(self.guarded(depth - 1, variables))
        if shape == 4:
            left = random_term(rng, 1, variables)
            right = rng.choice([left, random_term(rng, 1, variables)])
            return Match(left, right, self.process(depth - 1, variables), self.process(depth - 1, variables))
        if shape == 5 and variables:
            x = self.binder()
            rule = rng.choice(("fst", "snd"))
            return Deduce((Var(rng.choice(variables)),), rule, x,
                          self.process(depth - 1, variables + (x,)), self.process(depth - 1, variables))
        return NIL


def random_graph(rng: random.Random, names: Sequence[str]) -> Dict[str, set]:
    """A connected symmetric neighbor relation over `names`."""
    neighbors: Dict[str, set] = {name: set() for name in names}
    for index in range(1, len(names)):
        other = names[rng.randrange(index)]
        neighbors[names[index]].add(other)
        neighbors[other].add(names[index])
    for left in names:
        for right in names:
            if left < right and rng.random() < 0.3:
                neighbors[left].add(right)
                neighbors[right].add(left)
    return neighbors


def random_network(
    rng: random.Random,
    max_nodes: int = 4,
    max_depth: int = 5,
    definitions: int = 2,
    environment: Optional[Sequence[str]] = None,
) -> Network:
    """
    A well-formed, well-timed network.

    Args:
        rng: Seeded generator.
        max_nodes: Upper bound on the node count.
        max_depth: Upper bound on process nesting.
        definitions: Number of parameterless definitions to draw.
        environment: Outside names that every node lists as a neighbor.

    Returns:
        The sampled network.
    """
    targets = [f"H{i}" for i in range(definitions)]
    sampler = _ProcessSampler(rng, targets)
    defs = {
        name: ProcessDef(name, (), sampler.process(rng.randint(1, max_depth)))
        for name in targets
    }
    names = [f"n{i}" for i in range(rng.randint(1, max_nodes))]
    graph = random_graph(rng, names)
    outside = frozenset(environment or ())
    nodes = tuple(
        Node(name, sampler.process(rng.randint(0, max_depth)), frozenset(graph[name]) | outside)
        for name in names
    )
    return Network(nodes, defs)


def time_property_suite(
    count: int = 500,
    seed: int = 2024,
    max_nodes: int = 4,
    max_depth: int = 5,
    max_sigma: int = 4,
    step_budget: int = 64,
    state_budget: int = 20000,
) -> CheckReport:
    """
    Run the timing laws over `count` sampled networks.

    Returns:
        A report that fails with one violation line per offending network
        and is inconclusive when some exploration hit the state budget.
    """
    rng = random.Random(seed)
    violations: List[str] = []
    states_cut = 0
    for number in range(count):
        m = random_network(rng, max_nodes, max_depth)
        found, complete = time_property_violations(m, max_sigma, step_budget, state_budget)
        if not complete:
            states_cut += 1
        violations.extend(f"network {number}: {line}" for line in found)
        logger.debug("network %d: %d violations", number, len(found))
    if violations:
        verdict = Verdict.FAILS
    elif states_cut:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.HOLDS
    notes = [f"{states_cut} explorations hit the state budget"] if states_cut else []
    return CheckReport(
        check="time-props",
        subject=f"{count} random networks (seed {seed})",
        verdict=verdict,
        evidence=[
            "laws: sigma uniqueness, patience, maximal progress, well-formedness, instantaneous steps",
            f"networks: {count}, nodes <= {max_nodes}, depth <= {max_depth}, sigma layers {max_sigma}",
        ],
        violations=violations,
        notes=notes,
    )
