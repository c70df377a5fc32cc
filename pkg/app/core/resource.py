"""
Finite-support resource laws: the distribution of how many times an informed
server may forward the rumor.
"""
from __future__ import annotations

import bisect
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from app.errors import ConfigurationError, DomainError

NORMALIZATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ResourceLaw:
    """Probability law on a finite set of non-negative integers.

    ``support`` is strictly increasing and every entry of ``probs`` is positive.
    """

    support: tuple[int, ...]
    probs: tuple[float, ...]
    _cdf: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.support) == 0 or len(self.support) != len(self.probs):
            raise ConfigurationError("Resource law needs matching, non-empty support and probabilities")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ConfigurationError("Resource law support must be strictly increasing")
        if self.support[0] < 0:
            raise ConfigurationError("Resource law support must be non-negative")
        if any(p <= 0.0 for p in self.probs):
            raise ConfigurationError("Resource law probabilities must be positive")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"Resource law probabilities sum to {total}, not 1")
        cdf = list(np.cumsum(self.probs))
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", tuple(float(c) for c in cdf))

    @property
    def max_value(self) -> int:
        return self.support[-1]

    @property
    def is_constant(self) -> bool:
        return len(self.support) == 1

    @cached_property
    def _support_array(self) -> np.ndarray:
        return np.asarray(self.support, dtype=float)

    @cached_property
    def _probs_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def mean(self) -> float:
        return float(np.dot(self._probs_array, self._support_array))

    def second_moment(self) -> float:
        return float(np.dot(self._probs_array, self._support_array**2))

    def variance(self) -> float:
        m = self.mean()
        return max(self.second_moment() - m * m, 0.0)

    def pmf_of(self, k: int) -> float:
        idx = bisect.bisect_left(self.support, k)
        if idx < len(self.support) and self.support[idx] == k:
            return self.probs[idx]
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support, self.probs))

    def pgf_at(self, x: float) -> float:
        """E[x^K] for x in [0, 1]"""
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"Generating function evaluated outside [0, 1]: {x}")
        return float(np.dot(self._probs_array, np.power(x, self._support_array)))

    def thin(self, p: float) -> ResourceLaw:
        """Law of sum_{k<=K} B_k with B_k i.i.d. Bernoulli(p) independent of K"""
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"Thinning probability must lie in [0, 1], got {p}")
        values = np.arange(self.max_value + 1)
        pmf = np.zeros(self.max_value + 1)
        for k, w in zip(self.support, self.probs):
            pmf += w * stats.binom.pmf(values, k, p)
        return _law_from_array(pmf)

    def sample(self, u: float) -> int:
        """Inverse-CDF sample from a uniform in [0, 1)"""
        return self.support[bisect.bisect_right(self._cdf, u)] if u < 1.0 else self.support[-1]


def _law_from_array(pmf: np.ndarray) -> ResourceLaw:
    pairs = [(k, float(w)) for k, w in enumerate(pmf) if w > 0.0]
    total = sum(w for _, w in pairs)
    return ResourceLaw(tuple(k for k, _ in pairs), tuple(w / total for _, w in pairs))


def make_law(
    pmf: Mapping[int, float] | Iterable[tuple[int, float]] | None = None,
    *,
    constant: int | None = None,
) -> ResourceLaw:
    """Build a law from a constant or from (value, probability) pairs.

    Zero-probability entries are dropped; a total within NORMALIZATION_TOLERANCE
    of 1 is renormalised.
    """
    if (pmf is None) == (constant is None):
        raise ConfigurationError("Give exactly one of a constant or a pmf")
    if constant is not None:
        if int(constant) != constant or constant < 0:
            raise ConfigurationError(f"Constant resource must be a non-negative integer, got {constant}")
        return ResourceLaw((int(constant),), (1.0,))

    items = list(pmf.items()) if isinstance(pmf, Mapping) else list(pmf)
    if not items:
        raise ConfigurationError("Resource pmf is empty")
    seen: dict[int, float] = {}
    for value, prob in items:
        if int(value) != value or value < 0:
            raise ConfigurationError(f"Resource values must be non-negative integers, got {value}")
        if prob < 0:
            raise ConfigurationError(f"Negative probability {prob} for value {value}")
        if int(value) in seen:
            raise ConfigurationError(f"Duplicate resource value {value}")
        seen[int(value)] = float(prob)

    total = sum(seen.values())
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise ConfigurationError(f"Resource pmf sums to {total}, not 1")
    kept = sorted((k, w / total) for k, w in seen.items() if w > 0.0)
    return ResourceLaw(tuple(k for k, _ in kept), tuple(w for _, w in kept))


def binomial_law(trials: int, p: float) -> ResourceLaw:
    """Binomial(trials, p), a convenient resource law for experiments"""
    if trials < 0 or not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"Invalid binomial parameters ({trials}, {p})")
    return _law_from_array(stats.binom.pmf(np.arange(trials + 1), trials, p))
