"""Seeded randomness: key derivation, resampling plans, feature subsets.

Every random draw in the package is a pure function of a (master_seed,
stream_id) pair plus integer salts, mixed through splitmix64.  Derived keys
feed numpy Generators, so the draw schedule never depends on thread count
or call interleaving: whoever owns a key gets the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_MASK64 = 0xFFFFFFFFFFFFFFFF

RESAMPLE_KINDS = ("bootstrap", "subsample", "population")


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Fold any number of integers into a single 64-bit key.

    Chained splitmix64: order-sensitive, stateless, and cheap, so callers
    can derive per-member / per-node / per-stage keys on the fly instead
    of consuming a shared sequential stream.
    """
    h = 0
    for v in values:
        h = _splitmix64(h ^ (int(v) & _MASK64))
    return h


def rng_from_key(key: int) -> np.random.Generator:
    """A numpy Generator owned by `key`; equal keys give equal streams."""
    return np.random.default_rng(key & _MASK64)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream id; all other keys are derived from it."""

    master_seed: int
    stream_id: int = 0

    def key(self, *salts: int) -> int:
        return mix64(self.master_seed, self.stream_id, *salts)

    def rng(self, *salts: int) -> np.random.Generator:
        return rng_from_key(self.key(*salts))


@dataclass(frozen=True)
class ResamplePlan:
    """How each of b_members training samples is drawn from the source."""

    kind: str
    rate: float = 2.0 / 3.0
    b_members: int = 100

    def __post_init__(self) -> None:
        if self.kind not in RESAMPLE_KINDS:
            raise ConfigError(f"unknown resampling kind {self.kind!r}")
        if not 0.0 < self.rate <= 1.0:
            raise ConfigError(f"resampling rate must be in (0, 1], got {self.rate}")
        if self.b_members < 1:
            raise ConfigError(f"b_members must be >= 1, got {self.b_members}")


def ceil_count(fraction: float, n: int) -> int:
    """ceil(fraction * n) with a guard against float dust (0.7*10 -> 7)."""
    m = int(math.ceil(fraction * n - 1e-12))
    return min(max(m, 1), n)


def draw_indices(plan: ResamplePlan, b: int, n: int, seed: SeedSpec) -> np.ndarray:
    """Row indices for member b.

    bootstrap: n draws with replacement, draw order preserved.
    subsample: ceil(rate*n) distinct rows, returned sorted.
    population: the b-th disjoint block [b*n, (b+1)*n) of a pooled source.
    """
    if not 0 <= b < plan.b_members:
        raise ConfigError(f"member index {b} outside plan with B={plan.b_members}")
    if n < 1:
        raise ConfigError(f"cannot resample from {n} rows")
    if plan.kind == "population":
        return np.arange(b * n, (b + 1) * n, dtype=np.int64)
    rng = seed.rng(_ROWS_SALT, b)
    if plan.kind == "bootstrap":
        return rng.integers(0, n, size=n, dtype=np.int64)
    m = ceil_count(plan.rate, n)
    if m == n:
        return np.arange(n, dtype=np.int64)
    return np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)


def feature_count(k_total: int, mtry: float) -> int:
    """Candidate-count rule shared by all learners: round(mtry*K) half-up, floor 1."""
    if not 0.0 < mtry <= 1.0:
        raise ConfigError(f"mtry must be in (0, 1], got {mtry}")
    return min(k_total, max(1, int(mtry * k_total + 0.5)))


def choose_features(k_total: int, mtry: float, rng: np.random.Generator) -> np.ndarray:
    """Distinct candidate feature indices, uniformly, sorted ascending.

    mtry == 1 returns every feature and consumes no randomness, so a
    full-candidate learner is bitwise independent of its seed.
    """
    if k_total < 1:
        raise ConfigError("need at least one feature")
    m = feature_count(k_total, mtry)
    if m == k_total:
        return np.arange(k_total, dtype=np.int64)
    return np.sort(rng.choice(k_total, size=m, replace=False)).astype(np.int64)


# Salt namespace.  Small integers, unique per role; collisions across roles
# would alias streams, so they are all declared here.
_ROWS_SALT = 1
SALT_SPLIT = 2
SALT_TREE = 3
SALT_STAGE_ROWS = 4
SALT_STAGE_TREE = 5
SALT_MARS_STEPS = 6
SALT_MARS_RESTART = 7
SALT_MEMBER = 8
SALT_AUGMENT = 9
SALT_DROP = 10
SALT_LEARNER = 11
SALT_PRUNE_CV = 12
SALT_PRUNE_FOLD = 13
SALT_DATA_TRAIN = 14
SALT_DATA_TEST = 15
SALT_DATA_POOL = 16
SALT_CALIBRATE = 17
SALT_REP = 18
SALT_VARIANT = 19
SALT_FIG2 = 20
SALT_BENCH = 21
