"""
Exact laws of small instances.

The tree and graph models are enumerated by re-execution: the construction
runs on a scripted source that raises at the first unassigned address, and
every outcome of that variable is pushed back with its probability. The
complete-graph chain is solved by dynamic programming over (s, N).
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable

import numpy as np

from app.core.mode2 import run_mode2_direct
from app.core.resource import ResourceLaw
from app.core.rng_streams import Family, RandomSource
from app.core.tree_explore import run_cg_sequential, run_coupled_delayed, run_er_mode1
from app.errors import ConfigurationError, InvariantViolation, OracleInfeasibleError

logger = logging.getLogger(__name__)

DEFAULT_DEPTH_CAP = 24
MAX_ENUM_N = 3
MAX_ENUM_RESOURCE = 2
MAX_DP_N = 64
SUM_TOLERANCE = 1e-9

ORACLE_MODELS = ("complete", "er1", "cg-seq", "coupled", "er2", "er2-coupled")


class _Branch(Exception):
    def __init__(self, address, outcomes):
        super().__init__(address)
        self.address = address
        self.outcomes = outcomes


@dataclass(frozen=True)
class ScriptedSource(RandomSource):
    """Serves assigned values; an unassigned variable with several outcomes raises _Branch"""

    assignment: dict = field(default_factory=dict, compare=False)

    def _value(self, address, outcomes):
        if address in self.assignment:
            return self.assignment[address]
        if len(outcomes) == 1:
            return outcomes[0][0]
        raise _Branch(address, outcomes)

    def _uniform_labels(self, count):
        return [(j, 1.0 / count) for j in range(1, count + 1)]

    def _bits(self):
        if self.p == 0.0:
            return [(0, 1.0)]
        if self.p == 1.0:
            return [(1, 1.0)]
        return [(1, self.p), (0, 1.0 - self.p)]

    def draw_uniform(self, family, i, k):
        raise OracleInfeasibleError("Raw uniform draws cannot be enumerated")

    def uniform_row(self, family, i, ks):
        raise OracleInfeasibleError("Raw uniform draws cannot be enumerated")

    def draw_resource(self, i):
        self._check_label(i)
        return self._value((Family.RESOURCE, i, 0), list(zip(self.law.support, self.law.probs)))

    def draw_target(self, i, k):
        self._check_label(i)
        return self._value((Family.TARGET, i, k), self._uniform_labels(self.n))

    def draw_bernoulli(self, i, k):
        self._check_label(i)
        family, kk = (Family.BERNOULLI_FILL, -k) if k < 0 else (Family.BERNOULLI, k)
        return self._value((family, i, kk), self._bits())

    def bernoulli_row(self, i, ks):
        return np.array([self.draw_bernoulli(i, -int(k)) == 1 for k in ks], dtype=bool)

    def draw_initial(self):
        return self._value((Family.INITIAL, 0, 0), self._uniform_labels(self.n))

    def draw_neighbor(self, i, k, degree):
        return self._value((Family.NEIGHBOR, i, k), [(d, 1.0 / degree) for d in range(degree)])


def enumerate_outcomes(
    run: Callable[[RandomSource], Hashable],
    n: int,
    p: float,
    law: ResourceLaw,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> Dict[Hashable, float]:
    """Exact law of ``run(src)`` over every assignment of the variables it reads"""
    pmf: Dict[Hashable, float] = defaultdict(float)
    stack = [({}, 1.0)]
    leaves = 0
    while stack:
        assignment, weight = stack.pop()
        try:
            outcome = run(ScriptedSource(0, n, p, law, assignment=assignment))
        except _Branch as branch:
            if len(assignment) >= depth_cap:
                raise OracleInfeasibleError(
                    f"Enumeration needs more than {depth_cap} random variables on one path"
                ) from None
            for value, prob in branch.outcomes:
                if prob > 0.0:
                    stack.append(({**assignment, branch.address: value}, weight * prob))
            continue
        pmf[outcome] += weight
        leaves += 1

    total = sum(pmf.values())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise InvariantViolation(f"Enumerated probabilities sum to {total}")
    logger.debug("enumerated %d leaves", leaves)
    return dict(pmf)


def complete_chain_law(n: int, law: ResourceLaw, joint: bool = False) -> Dict[Hashable, float]:
    """Law of N(absorption), or of (absorption time, N), for the complete-graph chain"""
    memo: Dict[tuple, Dict[tuple, float]] = {}

    def from_state(s: int, informed: int) -> Dict[tuple, float]:
        key = (s, informed)
        if key in memo:
            return memo[key]
        if s == 0:
            result = {(0, informed): 1.0}
        else:
            result = defaultdict(float)
            hit = informed / n
            for (time, final), w in from_state(s - 1, informed).items():
                result[(time + 1, final)] += hit * w
            if informed < n:
                for k, pk in zip(law.support, law.probs):
                    for (time, final), w in from_state(s + k - 1, informed + 1).items():
                        result[(time + 1, final)] += (1.0 - hit) * pk * w
            result = dict(result)
        memo[key] = result
        return result

    pmf: Dict[Hashable, float] = defaultdict(float)
    for k, pk in zip(law.support, law.probs):
        for (time, final), w in from_state(k, 1).items():
            pmf[(time, final) if joint else final] += pk * w
    return dict(pmf)


def _cg_seq_joint(src: RandomSource) -> tuple:
    outcome = run_cg_sequential(src)
    return (outcome.open_attempts, outcome.final_informed)


def exact_small_distribution(
    model: str,
    n: int,
    p: float,
    law: ResourceLaw,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    statistic: str = "final",
) -> Dict[Hashable, float]:
    """Exact pmf of the final informed count (``statistic="final"``), or of
    (stopping index, final count) for ``complete`` and ``cg-seq``"""
    if model not in ORACLE_MODELS:
        raise ConfigurationError(f"Unknown oracle model '{model}'")
    if n < 1:
        raise ConfigurationError(f"Population size must be at least 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"Edge probability must lie in [0, 1], got {p}")
    if statistic not in ("final", "joint"):
        raise ConfigurationError(f"Unknown statistic '{statistic}'")
    if statistic == "joint" and model not in ("complete", "cg-seq"):
        raise ConfigurationError("The joint statistic is defined for 'complete' and 'cg-seq' only")

    if model == "complete":
        if n > MAX_DP_N:
            raise OracleInfeasibleError(f"Chain recursion limited to n <= {MAX_DP_N}")
        return complete_chain_law(n, law, joint=statistic == "joint")
    if model == "er2-coupled":
        raise OracleInfeasibleError("Mode-2 coupling scans are unbounded and cannot be enumerated")
    if n > MAX_ENUM_N or law.max_value > MAX_ENUM_RESOURCE:
        raise OracleInfeasibleError(
            f"Enumeration needs n <= {MAX_ENUM_N} and resource <= {MAX_ENUM_RESOURCE}"
        )

    runners = {
        "er1": lambda src: run_er_mode1(src).final_informed,
        "cg-seq": _cg_seq_joint if statistic == "joint" else (lambda src: run_cg_sequential(src).final_informed),
        "coupled": lambda src: run_coupled_delayed(src).final_cgd,
        "er2": lambda src: run_mode2_direct(src).final_informed,
    }
    return enumerate_outcomes(runners[model], n, p, law, depth_cap)

