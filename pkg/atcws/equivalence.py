"""
Bounded weak simulation and bisimulation.

Pairs of states are explored on the fly from the initial pair, up to a
number of sigma layers. Every move of a state must be weakly matched by the
other side; pairs beyond the sigma bound are assumed related. A greatest
fixpoint pass then removes pairs with an unmatched move. When the initial
pair is removed the shortest trace one side runs and the other cannot match
is returned as the counterexample.
"""

import logging
from collections import deque
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from pydantic import BaseModel, Field

from .errors import PreconditionError, StructuralError
from .lts import Label, Semantics, Sigma, State, Trace, format_label
from .messages import Term
from .models import Verdict
from .syntax import Network, structural_violations

logger = logging.getLogger(__name__)

Pair = Tuple[State, State]


# =============================================================================
# Results
# =============================================================================

class Counterexample(BaseModel):
    """A trace followed by a label the right-hand side cannot match."""
    trace: Trace = Field(..., description="Trace executed by the left network")
    blocking: Label = Field(..., description="Label the right-hand network cannot match")
    branching: bool = Field(False, description="True when the right side can run the trace but not stay related")

    class Config:
        arbitrary_types_allowed = True

    @property
    def replayable(self) -> bool:
        """True when trace plus blocking label runs on the left side only."""
        return not self.branching

    def lines(self) -> List[str]:
        return [format_label(label) for label in self.trace] + [format_label(self.blocking)]


class SimResult(BaseModel):
    """Verdict of a bounded weak simulation or bisimulation check."""
    verdict: Verdict = Field(..., description="holds, fails or inconclusive")
    counterexample: Optional[Counterexample] = Field(None, description="Witness when the check fails")
    explored_pairs: int = Field(0, description="Number of state pairs examined")
    bound_hit: bool = Field(False, description="True when a bound truncated the search")
    notes: List[str] = Field(default_factory=list, description="Truncation and scoping notes")

    @property
    def holds(self) -> bool:
        return self.verdict == Verdict.HOLDS

    def traces(self, name: str) -> Dict[str, List[str]]:
        """
        Report traces for the counterexample.

        A replayable witness is stored under `name`. A branching witness
        runs on both sides and goes under `name` + "-branching" instead.
        """
        if self.counterexample is None:
            return {}
        key = name if self.counterexample.replayable else f"{name}-branching"
        return {key: self.counterexample.lines()}


def _require_structure(network: Network, role: str) -> None:
    violations = structural_violations(network, connectivity=False)
    if violations:
        raise PreconditionError(f"{role} network is ill-formed: {violations[0]}")


class _Requirement:
    __slots__ = ("side", "label", "candidates")

    def __init__(self, side: str, label: Label, candidates: List[int]):
        self.side = side
        self.label = label
        self.candidates = candidates


class PairGame:
    """
    Greatest-fixpoint game over state pairs.

    Args:
        left: Engine for the network whose moves must be matched.
        right: Engine for the matching network.
        max_sigma: Sigma layers explored.
        symmetric: Also require right moves to be matched by left (bisimulation).
        tau_bound: Longest tau path per weak step.
        state_budget: Largest pair table.
    """

    def __init__(
        self,
        left: Semantics,
        right: Semantics,
        max_sigma: int,
        symmetric: bool = False,
        tau_bound: int = 64,
        state_budget: int = 200000,
    ):
        self.left = left
        self.right = right
        self.max_sigma = max_sigma
        self.symmetric = symmetric
        self.tau_bound = tau_bound
        self.state_budget = state_budget
        self.pairs: List[Pair] = []
        self.depth: List[int] = []
        self.requirements: List[List[_Requirement]] = []
        self.index: Dict[Pair, int] = {}
        self.budget_hit = False
        self.tau_cut = False

    def _intern(self, pair: Pair, depth: int, queue: deque) -> int:
        number = self.index.get(pair)
        if number is None:
            number = len(self.pairs)
            self.index[pair] = number
            self.pairs.append(pair)
            self.depth.append(depth)
            self.requirements.append([])
            queue.append(number)
        return number

    def _matches(self, engine: Semantics, state: State, label: Label) -> Tuple[State, ...]:
        found, cut = engine.weak(state, label, self.tau_bound)
        self.tau_cut = self.tau_cut or cut
        return found

    def _expand(self, number: int, queue: deque) -> None:
        left_state, right_state = self.pairs[number]
        depth = self.depth[number]
        requirements = self.requirements[number]
        for label, successor in self.left.observed(left_state):
            next_depth = depth + 1 if isinstance(label, Sigma) else depth
            matches = self._matches(self.right, right_state, label)
            if next_depth > self.max_sigma:
                if not matches:
                    requirements.append(_Requirement("left", label, []))
                continue
            candidates = list(dict.fromkeys(
                self._intern((successor, match), next_depth, queue) for match in matches
            ))
            requirements.append(_Requirement("left", label, candidates))
        if not self.symmetric:
            return
        for label, successor in self.right.observed(right_state):
            next_depth = depth + 1 if isinstance(label, Sigma) else depth
            matches = self._matches(self.left, left_state, label)
            if next_depth > self.max_sigma:
                if not matches:
                    requirements.append(_Requirement("right", label, []))
                continue
            candidates = list(dict.fromkeys(
                self._intern((match, successor), next_depth, queue) for match in matches
            ))
            requirements.append(_Requirement("right", label, candidates))

    def solve(self) -> SimResult:
        queue: deque = deque()
        self._intern((self.left.initial(), self.right.initial()), 0, queue)
        while queue:
            number = queue.popleft()
            if len(self.pairs) > self.state_budget:
                logger.warning("pair budget %d exceeded; remaining pairs assumed related", self.state_budget)
                self.budget_hit = True
                break
            self._expand(number, queue)
        logger.debug("explored %d pairs", len(self.pairs))
        alive = self._fixpoint()
        notes = []
        if self.budget_hit:
            notes.append("pair budget exhausted")
        if self.tau_cut:
            notes.append("tau-closure truncated")
        if alive[0]:
            verdict = Verdict.INCONCLUSIVE if self.budget_hit else Verdict.HOLDS
            return SimResult(
                verdict=verdict,
                explored_pairs=len(self.pairs),
                bound_hit=self.budget_hit,
                notes=notes,
            )
        counterexample = self.counterexample(alive)
        verdict = Verdict.INCONCLUSIVE if self.tau_cut else Verdict.FAILS
        return SimResult(
            verdict=verdict,
            counterexample=counterexample,
            explored_pairs=len(self.pairs),
            bound_hit=self.tau_cut or self.budget_hit,
            notes=notes,
        )

    def _fixpoint(self) -> List[bool]:
        alive = [True] * len(self.pairs)
        counters: List[List[int]] = []
        dependents: Dict[int, List[Tuple[int, int]]] = {}
        doomed = []
        for number, requirements in enumerate(self.requirements):
            counts = []
            for position, requirement in enumerate(requirements):
                counts.append(len(requirement.candidates))
                for candidate in requirement.candidates:
                    dependents.setdefault(candidate, []).append((number, position))
                if not requirement.candidates:
                    doomed.append(number)
            counters.append(counts)
        while doomed:
            number = doomed.pop()
            if not alive[number]:
                continue
            alive[number] = False
            for parent, position in dependents.get(number, ()):
                counters[parent][position] -= 1
                if counters[parent][position] == 0 and alive[parent]:
                    doomed.append(parent)
        return alive

    def counterexample(self, alive: List[bool]) -> Optional[Counterexample]:
        """Shortest trace-inclusion witness, else a path to a directly failing pair."""
        witness = _trace_witness(self.left, self.right, self.max_sigma, self.tau_bound, self.state_budget)
        if witness is None and self.symmetric:
            witness = _trace_witness(self.right, self.left, self.max_sigma, self.tau_bound, self.state_budget)
        if witness is not None:
            return witness
        return self._branching_witness(alive)

    def _branching_witness(self, alive: List[bool]) -> Optional[Counterexample]:
        queue = deque([(0, ())])
        seen = {0}
        while queue:
            number, labels = queue.popleft()
            for requirement in self.requirements[number]:
                if not requirement.candidates:
                    return Counterexample(trace=Trace(labels), blocking=requirement.label, branching=True)
            for requirement in self.requirements[number]:
                if all(not alive[c] for c in requirement.candidates):
                    for candidate in requirement.candidates:
                        if candidate not in seen:
                            seen.add(candidate)
                            queue.append((candidate, labels + (requirement.label,)))
        return None


def _trace_witness(
    left: Semantics,
    right: Semantics,
    max_sigma: int,
    tau_bound: int,
    budget: int,
) -> Optional[Counterexample]:
    """Breadth-first search for the shortest left trace the right side cannot run."""
    start_set, _ = right.tau_closure(right.initial(), tau_bound)
    start = (left.initial(), start_set)
    seen = {(start[0], frozenset(start_set))}
    queue = deque([(start, (), 0)])
    while queue:
        (left_state, right_states), labels, depth = queue.popleft()
        for label, successor in left.observed(left_state):
            next_depth = depth + 1 if isinstance(label, Sigma) else depth
            reached: Dict[State, None] = {}
            for state in right_states:
                found, _ = right.weak(state, label, tau_bound)
                reached.update(dict.fromkeys(found))
            if not reached:
                return Counterexample(trace=Trace(labels), blocking=label)
            if next_depth > max_sigma:
                continue
            key = (successor, frozenset(reached))
            if key in seen or len(seen) > budget:
                continue
            seen.add(key)
            queue.append(((successor, tuple(reached)), labels + (label,), next_depth))
    return None


def simulates(
    spec: Network,
    impl: Network,
    max_sigma: int,
    inputs: Optional[Mapping[str, Iterable[Term]]] = None,
    tau_bound: int = 64,
    state_budget: int = 200000,
    fuse: Iterable[str] = (),
    unfold_bound: int = 32,
) -> SimResult:
    """
    Check impl ≲ spec up to `max_sigma` sigma layers.

    Args:
        spec: The simulating network.
        impl: The network whose moves must be matched.
        max_sigma: Sigma layers explored.
        inputs: Environment input candidates, keyed by sender.
        fuse: Nodes of impl whose choice-then-broadcast steps are fused.

    Returns:
        SimResult; a failing result carries the shortest counterexample.

    Raises:
        PreconditionError: if either network is ill-formed.
    """
    _require_structure(spec, "spec")
    _require_structure(impl, "impl")
    left = Semantics(impl, inputs, fuse, unfold_bound)
    right = Semantics(spec, inputs, unfold_bound=unfold_bound)
    return PairGame(left, right, max_sigma, False, tau_bound, state_budget).solve()


def bisimilar(
    m: Network,
    n: Network,
    max_sigma: int,
    inputs: Optional[Mapping[str, Iterable[Term]]] = None,
    tau_bound: int = 64,
    state_budget: int = 200000,
) -> SimResult:
    """Bounded weak bisimilarity: one relation matching moves in both directions."""
    _require_structure(m, "left")
    _require_structure(n, "right")
    left = Semantics(m, inputs)
    right = Semantics(n, inputs)
    return PairGame(left, right, max_sigma, True, tau_bound, state_budget).solve()


def congruence_spot_check(
    m: Network,
    n: Network,
    ctx: Network,
    max_sigma: int,
    inputs: Optional[Mapping[str, Iterable[Term]]] = None,
) -> SimResult:
    """
    Compare m | ctx with n | ctx.

    Raises:
        StructuralError: if either composition is ill-formed.
    """
    left = m.compose(ctx)
    right = n.compose(ctx)
    for composed in (left, right):
        violations = structural_violations(composed, connectivity=False)
        if violations:
            raise StructuralError(f"composition is ill-formed: {violations[0]}")
    return bisimilar(left, right, max_sigma, inputs)
