"""
Address-keyed random streams.

Every random variable of a run lives at an address (family, i, k). Its value is
a pure function of (master_seed, family, i, k): a blake2b key is derived per
(seed, family, i) row and SplitMix64 mixes it with the counter k. Query order
therefore never changes a value, and whole rows can be produced with numpy.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

from app.core.resource import ResourceLaw
from app.errors import ConfigurationError, DomainError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB
TO_UNIT = 2.0**-53

_ROW = struct.Struct("<Bq")


class Family(IntEnum):
    RESOURCE = 1
    TARGET = 2
    BERNOULLI = 3
    BERNOULLI_FILL = 4
    INITIAL = 5
    CHAIN = 6
    CHAIN_RESOURCE = 7
    NEIGHBOR = 8


@lru_cache(maxsize=1 << 16)
def _row_key(seed_key: bytes, family: int, i: int) -> int:
    digest = hashlib.blake2b(_ROW.pack(family, i), digest_size=8, key=seed_key).digest()
    return int.from_bytes(digest, "little")


def _mix(row_key: int, k: int) -> int:
    z = (row_key + ((k & MASK64) + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_2) & MASK64
    return z ^ (z >> 31)


def _mix_array(row_key: int, ks: np.ndarray) -> np.ndarray:
    z = np.uint64(row_key) + (ks.astype(np.uint64) + np.uint64(1)) * np.uint64(GOLDEN_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RandomSource:
    """Deterministic source of every draw a run may need"""

    master_seed: int
    n: int
    p: float
    law: ResourceLaw
    _seed_key: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_seed_key", (self.master_seed & MASK64).to_bytes(8, "little"))

    def _check_label(self, i: int):
        if not 1 <= i <= self.n:
            raise DomainError(f"Server label {i} outside 1..{self.n}")

    def word(self, family: Family, i: int, k: int) -> int:
        """Raw 64-bit value at an address"""
        return _mix(_row_key(self._seed_key, int(family), i), k)

    def draw_uniform(self, family: Family, i: int, k: int) -> float:
        return (self.word(family, i, k) >> 11) * TO_UNIT

    def uniform_row(self, family: Family, i: int, ks: np.ndarray) -> np.ndarray:
        """Uniforms at (family, i, k) for every k in ``ks``, identical to scalar draws"""
        words = _mix_array(_row_key(self._seed_key, int(family), i), np.asarray(ks, dtype=np.int64))
        return (words >> np.uint64(11)).astype(np.float64) * TO_UNIT

    def draw_resource(self, i: int) -> int:
        self._check_label(i)
        return self.law.sample(self.draw_uniform(Family.RESOURCE, i, 0))

    def draw_target(self, i: int, k: int) -> int:
        self._check_label(i)
        if k < 1:
            raise DomainError(f"Target index must be positive, got {k}")
        return min(int(self.draw_uniform(Family.TARGET, i, k) * self.n), self.n - 1) + 1

    def draw_bernoulli(self, i: int, k: int) -> int:
        """B^i_k; a negative k addresses the graph-fill family at |k|"""
        self._check_label(i)
        if k == 0:
            raise DomainError("Bernoulli index must be non-zero")
        if k < 0:
            return int(self.draw_uniform(Family.BERNOULLI_FILL, i, -k) < self.p)
        return int(self.draw_uniform(Family.BERNOULLI, i, k) < self.p)

    def bernoulli_row(self, i: int, ks: np.ndarray) -> np.ndarray:
        """Fill-family Bernoullis B^i_{-k} for every k in ``ks``"""
        self._check_label(i)
        return self.uniform_row(Family.BERNOULLI_FILL, i, ks) < self.p

    def draw_initial(self) -> int:
        return min(int(self.draw_uniform(Family.INITIAL, 0, 0) * self.n), self.n - 1) + 1

    def draw_neighbor(self, i: int, k: int, degree: int) -> int:
        """Uniform index in 0..degree-1 for the k-th push of server i"""
        if degree < 1:
            raise DomainError("Neighbor draw needs at least one neighbor")
        return min(int(self.draw_uniform(Family.NEIGHBOR, i, k) * degree), degree - 1)

    def draw_chain_uniform(self, step: int) -> float:
        return self.draw_uniform(Family.CHAIN, 0, step)

    def draw_chain_resource(self, step: int, law: ResourceLaw | None = None) -> int:
        return (law or self.law).sample(self.draw_uniform(Family.CHAIN_RESOURCE, 0, step))


@dataclass(frozen=True)
class TableSource(RandomSource):
    """A source whose listed addresses return crafted values.

    ``overrides`` maps (family, i, k) to the value the draw must return: an int
    label, count or bit for the typed draws, a float for raw uniforms.
    """

    overrides: dict = field(default_factory=dict, compare=False)

    def _lookup(self, family: Family, i: int, k: int):
        return self.overrides.get((family, i, k))

    def draw_uniform(self, family, i, k):
        v = self._lookup(family, i, k)
        return super().draw_uniform(family, i, k) if v is None else float(v)

    def uniform_row(self, family, i, ks):
        return np.array([self.draw_uniform(family, i, int(k)) for k in ks], dtype=np.float64)

    def draw_resource(self, i):
        v = self._lookup(Family.RESOURCE, i, 0)
        return super().draw_resource(i) if v is None else int(v)

    def draw_target(self, i, k):
        v = self._lookup(Family.TARGET, i, k)
        return super().draw_target(i, k) if v is None else int(v)

    def draw_bernoulli(self, i, k):
        family, kk = (Family.BERNOULLI_FILL, -k) if k < 0 else (Family.BERNOULLI, k)
        v = self._lookup(family, i, kk)
        return super().draw_bernoulli(i, k) if v is None else int(v)

    def bernoulli_row(self, i, ks):
        return np.array([self.draw_bernoulli(i, -int(k)) == 1 for k in ks], dtype=bool)

    def draw_initial(self):
        v = self._lookup(Family.INITIAL, 0, 0)
        return super().draw_initial() if v is None else int(v)

    def draw_neighbor(self, i, k, degree):
        v = self._lookup(Family.NEIGHBOR, i, k)
        return super().draw_neighbor(i, k, degree) if v is None else int(v)

    def draw_chain_resource(self, step, law=None):
        v = self._lookup(Family.CHAIN_RESOURCE, 0, step)
        return super().draw_chain_resource(step, law) if v is None else int(v)


def make_source(master_seed: int, n: int, p: float, law: ResourceLaw) -> RandomSource:
    if n < 1:
        raise ConfigurationError(f"Population size must be at least 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"Edge probability must lie in [0, 1], got {p}")
    return RandomSource(master_seed=int(master_seed), n=int(n), p=float(p), law=law)


def replica_seed(base_seed: int, replica_id: int) -> int:
    """Independent 64-bit master seed for replica ``replica_id``"""
    if base_seed < 0 or replica_id < 0:
        raise ConfigurationError("Seeds and replica ids must be non-negative")
    state = np.random.SeedSequence([base_seed, replica_id]).generate_state(1, dtype=np.uint64)
    return int(state[0])
