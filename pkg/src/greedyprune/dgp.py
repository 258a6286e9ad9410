"""Synthetic data generators with signal-to-noise calibration.

Each generator draws features, evaluates a known conditional mean f, and adds
Gaussian noise whose variance is calibrated so Var(f(X)) / sigma^2 matches the
requested signal-to-noise ratio.  The noiseless f(X) is kept alongside every
sample so model quality can be measured against the truth rather than against
a noisy target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, write_csv
from .errors import ConfigError
from .randomization import (
    SALT_CALIBRATE,
    SALT_DATA_POOL,
    SALT_DATA_TEST,
    SALT_DATA_TRAIN,
    SALT_TREE,
    SeedSpec,
    mix64,
    rng_from_key,
)
from .tree import TreeModel, TreeParams, grow_matrix, predict as tree_predict

__all__ = [
    "DGP_KINDS",
    "DgpSpec",
    "Sample",
    "generate",
    "make_true_tree",
    "dump_sample",
    "snr_for_r2",
]

DGP_KINDS = ("tree", "friedman1", "friedman2", "friedman3", "linear", "noise_node")

_CALIBRATION_DRAWS = 100_000
_TREE_SOURCE_N = 400
_TREE_SOURCE_K = 10

# friedman2/friedman3 share one input box
_F23_LO = np.array([0.0, 40.0 * np.pi, 0.0, 1.0])
_F23_HI = np.array([100.0, 560.0 * np.pi, 1.0, 11.0])


def snr_for_r2(r2: float) -> float:
    """Signal-to-noise ratio that makes the population R-squared equal r2."""
    if not 0.0 < r2 < 1.0:
        raise ConfigError(f"r2 must be in (0, 1), got {r2}")
    return r2 / (1.0 - r2)


@dataclass(frozen=True)
class DgpSpec:
    """Recipe for one synthetic data draw.

    ``snr`` may be ``math.inf`` for a noiseless target.  ``tree_seed`` pins
    the frozen tree of the ``tree`` kind independently of the sampling seed,
    so replications share one conditional mean while drawing fresh data.
    ``noise_node`` has a constant mean (zero signal variance), so it takes an
    explicit ``noise_sd`` instead of an SNR; its feature count is ``k_noise``
    (all columns inert).
    """

    kind: str
    n: int
    snr: float = 4.0
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0, 0))
    tree_min_node: int = 40
    tree_seed: int = 0
    k_signal: int = 5
    k_noise: int = 5
    mu: float = 0.0
    noise_sd: float = 1.0
    n_test: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in DGP_KINDS:
            raise ConfigError(
                f"unknown dgp kind {self.kind!r}; expected one of {DGP_KINDS}"
            )
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if not (self.snr > 0.0):
            raise ConfigError(f"snr must be > 0, got {self.snr}")
        if self.kind == "linear" and self.k_signal < 1:
            raise ConfigError(f"k_signal must be >= 1, got {self.k_signal}")
        if self.k_noise < 0:
            raise ConfigError(f"k_noise must be >= 0, got {self.k_noise}")
        if self.noise_sd < 0.0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass
class Sample:
    """A drawn dataset together with its noiseless conditional mean."""

    data: Dataset
    f: np.ndarray


def make_true_tree(seed: int, min_node: int) -> TreeModel:
    """Freeze a fitted tree as a piecewise-constant conditional mean.

    Fits an exhaustive-split tree (every feature considered at every node)
    with the given minimum node size on auxiliary data: 400 rows of 10
    uniform features and a standard-normal pseudo-target.  The fitted
    prediction function is then used as the truth of the ``tree`` generator.
    """
    if min_node < 1:
        raise ConfigError(f"min_node must be >= 1, got {min_node}")
    rng = rng_from_key(mix64(seed, SALT_DATA_POOL))
    X = rng.uniform(size=(_TREE_SOURCE_N, _TREE_SOURCE_K))
    y = rng.standard_normal(_TREE_SOURCE_N)
    return grow_matrix(
        X, y, TreeParams(min_node=min_node, mtry=1.0), mix64(seed, SALT_TREE)
    )


def _draw_features(spec: DgpSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    kind = spec.kind
    if kind in ("friedman1", "tree"):
        return rng.uniform(size=(n, 10))
    if kind in ("friedman2", "friedman3"):
        return rng.uniform(low=_F23_LO, high=_F23_HI, size=(n, 4))
    if kind == "linear":
        return rng.standard_normal((n, spec.k_signal + spec.k_noise))
    # noise_node: features carry no signal at all; k_noise sets the width
    return rng.uniform(size=(n, max(spec.k_noise, 1)))


def _mean_function(spec: DgpSpec, X: np.ndarray, tree: TreeModel | None) -> np.ndarray:
    kind = spec.kind
    if kind == "friedman1":
        return (
            10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3]
            + 5.0 * X[:, 4]
        )
    if kind == "friedman2":
        return np.sqrt(X[:, 0] ** 2 + (X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])) ** 2)
    if kind == "friedman3":
        return np.arctan((X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])) / X[:, 0])
    if kind == "linear":
        return X[:, : spec.k_signal].sum(axis=1)
    if kind == "tree":
        assert tree is not None
        return tree_predict(tree, X)
    return np.full(X.shape[0], spec.mu)


_sigma_cache: dict[tuple, float] = {}


def _noise_sd(spec: DgpSpec, tree: TreeModel | None) -> float:
    """Noise SD giving Var(f)/sigma^2 = snr, via Monte-Carlo variance of f.

    The Monte-Carlo draw is keyed only by the shape of the mean function, so
    every replication of the same generator shares one calibrated sigma and
    the cache is stable across runs and processes.
    """
    if spec.kind == "noise_node":
        return spec.noise_sd
    if math.isinf(spec.snr):
        return 0.0
    cache_key: tuple = (spec.kind, spec.snr)
    if spec.kind == "tree":
        cache_key += (spec.tree_seed, spec.tree_min_node)
    elif spec.kind == "linear":
        cache_key += (spec.k_signal, spec.k_noise)
    if cache_key not in _sigma_cache:
        rng = rng_from_key(mix64(SALT_CALIBRATE, DGP_KINDS.index(spec.kind)))
        Xmc = _draw_features(spec, rng, _CALIBRATION_DRAWS)
        var_f = float(np.var(_mean_function(spec, Xmc, tree)))
        _sigma_cache[cache_key] = math.sqrt(var_f / spec.snr)
    return _sigma_cache[cache_key]


def _draw_sample(
    spec: DgpSpec, rng: np.random.Generator, n: int, sigma: float, tree: TreeModel | None
) -> Sample:
    X = _draw_features(spec, rng, n)
    f = _mean_function(spec, X, tree)
    y = f + sigma * rng.standard_normal(n) if sigma > 0.0 else f.copy()
    return Sample(data=Dataset.from_arrays(X, y), f=f)


def generate(spec: DgpSpec) -> tuple[Sample, Sample]:
    """Draw independent train and test samples from one generator.

    The two samples come from separate random streams of the same seed, so
    neither is sensitive to the size of the other.  Test size defaults to the
    train size.
    """
    tree = (
        make_true_tree(spec.tree_seed, spec.tree_min_node)
        if spec.kind == "tree"
        else None
    )
    sigma = _noise_sd(spec, tree)
    n_test = spec.n if spec.n_test is None else spec.n_test
    train = _draw_sample(spec, spec.seed.rng(SALT_DATA_TRAIN), spec.n, sigma, tree)
    test = _draw_sample(spec, spec.seed.rng(SALT_DATA_TEST), n_test, sigma, tree)
    return train, test


def dump_sample(sample: Sample, path) -> None:
    """Write one sample as CSV: target, features, then a ``__f`` truth column."""
    ds = sample.data
    augmented = Dataset.from_arrays(
        np.column_stack([ds.features, sample.f]),
        ds.target,
        names=list(ds.names) + ["__f"],
        target_name=ds.target_name,
    )
    write_csv(augmented, path)
