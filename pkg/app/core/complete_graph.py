"""
Resource-constrained push protocol on the complete graph as a Markov chain.

The state is (s, N): s attempts left to spend, N servers informed. Each step
spends one attempt; with probability N/n it hits an informed server, otherwise
it informs a new server, who adds its own resource to the stock.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from app.core.resource import ResourceLaw
from app.core.rng_streams import Family, RandomSource
from app.errors import ConfigurationError, DomainError, InvariantViolation

logger = logging.getLogger(__name__)

TRACE_HEADER = ["time", "s", "n_informed"]


@dataclass(frozen=True)
class ChainState:
    n: int
    law: ResourceLaw
    s: int
    n_informed: int
    time: int = 0
    total_resource: int = 0

    @property
    def absorbed(self) -> bool:
        return self.s == 0


@dataclass
class ChainRun:
    absorption_time: int
    final_informed: int
    total_resource: int
    trace: Optional[List[Tuple[int, int, int]]] = field(default=None, repr=False)


def init_chain(n: int, law: ResourceLaw, src: RandomSource) -> ChainState:
    """Start with one informed server holding its own resource"""
    if n < 1:
        raise ConfigurationError(f"Population size must be at least 1, got {n}")
    first = min(src.draw_initial(), n)
    k = law.sample(src.draw_uniform(Family.RESOURCE, first, 0))
    return ChainState(n=n, law=law, s=k, n_informed=1, time=0, total_resource=k)


def step_chain(state: ChainState, src: RandomSource) -> ChainState:
    if state.absorbed:
        raise DomainError("Cannot step an absorbed chain")
    u = src.draw_chain_uniform(state.time)
    if u < state.n_informed / state.n:
        return replace(state, s=state.s - 1, time=state.time + 1)
    k = src.draw_chain_resource(state.time, state.law)
    return replace(
        state,
        s=state.s + k - 1,
        n_informed=state.n_informed + 1,
        time=state.time + 1,
        total_resource=state.total_resource + k,
    )


def run_chain(n: int, law: ResourceLaw, src: RandomSource, trace: bool = False) -> ChainRun:
    state = init_chain(n, law, src)
    rows = [(state.time, state.s, state.n_informed)] if trace else None
    while not state.absorbed:
        state = step_chain(state, src)
        if rows is not None:
            rows.append((state.time, state.s, state.n_informed))

    if state.time != state.total_resource:
        raise InvariantViolation(
            f"Chain spent {state.time} attempts but drew {state.total_resource} units of resource"
        )
    logger.debug("chain absorbed at %d with %d informed", state.time, state.n_informed)
    return ChainRun(
        absorption_time=state.time,
        final_informed=state.n_informed,
        total_resource=state.total_resource,
        trace=rows,
    )
