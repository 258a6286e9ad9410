"""Stagewise greedy least squares and ordinary least squares.

Two linear baselines sharing one prediction path: a greedy stagewise fitter
that adds one scaled univariate coefficient per step (never revising earlier
steps), and a plain OLS solver with minimum-norm semantics so it stays
well-defined past the interpolation threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, design_matrix
from .errors import ConfigError, DataError

__all__ = [
    "GreedyLsParams",
    "GreedyLsModel",
    "OlsModel",
    "greedy_ls_fit",
    "ols_fit",
    "linear_predict",
]


@dataclass(frozen=True)
class GreedyLsParams:
    """Configuration for the stagewise fitter, for use as an ensemble base."""

    steps: int = 100
    learning_rate: float = 1.0

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if not 0.0 < self.learning_rate <= 2.0:
            raise ConfigError(
                f"learning_rate must be in (0, 2], got {self.learning_rate}"
            )


@dataclass
class GreedyLsModel:
    """Linear model built by stagewise selection on standardized features.

    ``selections`` records the fit order as ``(feature, increment)`` pairs,
    where the increment is already on the original feature scale; ``coefs``
    is their per-feature sum.
    """

    intercept: float
    coefs: np.ndarray
    selections: list[tuple[int, float]]
    learning_rate: float
    steps: int
    n_features: int = field(default=0)

    def __post_init__(self) -> None:
        if self.n_features == 0:
            self.n_features = int(self.coefs.shape[0])


@dataclass
class OlsModel:
    """Least-squares fit of an intercept plus all features.

    Minimum-norm solution when the design is rank-deficient, so the model
    remains defined when features outnumber rows.
    """

    intercept: float
    coefs: np.ndarray
    n_features: int = field(default=0)

    def __post_init__(self) -> None:
        if self.n_features == 0:
            self.n_features = int(self.coefs.shape[0])


def greedy_ls_fit(
    train: Dataset, steps: int, learning_rate: float = 1.0
) -> GreedyLsModel:
    """Fit a linear model one scaled univariate regression at a time.

    Each step standardizes nothing anew: features are centered and scaled
    once, the step regresses the current residual on the single feature with
    the largest squared correlation (equivalently, the largest univariate SSE
    reduction), and ``learning_rate`` times that univariate coefficient is
    added to the model.  Earlier coefficients are never revised, the same
    feature may be selected repeatedly, and zero-variance features are never
    selected.  ``steps=0`` returns the intercept-only model.
    """
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    if not 0.0 < learning_rate <= 2.0:
        raise ConfigError(
            f"learning_rate must be in (0, 2], got {learning_rate}"
        )
    X, _ = design_matrix(train)
    y = np.asarray(train.target, dtype=np.float64)
    n, k = X.shape
    if n == 0:
        raise DataError("cannot fit on an empty dataset")

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    # exact max==min, not sd > 0: a constant column can pick up a float-dust
    # standard deviation through the mean and must still be excluded
    usable = (X.max(axis=0) > X.min(axis=0)) & (sd > 0.0)
    Xs = np.zeros_like(X)
    Xs[:, usable] = (X[:, usable] - mu[usable]) / sd[usable]

    ybar = float(y.mean())
    r = y - ybar
    coefs_std = np.zeros(k)
    selections: list[tuple[int, float]] = []
    if usable.any():
        for _ in range(steps):
            corr = Xs.T @ r
            corr[~usable] = 0.0
            j = int(np.argmax(corr * corr))
            b = float(corr[j]) / n  # univariate coefficient: x'r / x'x with x'x = n
            inc = learning_rate * b
            coefs_std[j] += inc
            r = r - inc * Xs[:, j]
            selections.append((j, inc / sd[j]))

    coefs = np.zeros(k)
    coefs[usable] = coefs_std[usable] / sd[usable]
    intercept = ybar - float(coefs @ mu)
    return GreedyLsModel(
        intercept=intercept,
        coefs=coefs,
        selections=selections,
        learning_rate=learning_rate,
        steps=steps,
        n_features=k,
    )


def ols_fit(train: Dataset) -> OlsModel:
    """Least-squares fit of intercept plus every feature.

    Uses the pseudo-inverse, so a rank-deficient design (including more
    features than rows) yields the minimum-norm coefficient vector instead
    of an error.
    """
    X, _ = design_matrix(train)
    y = np.asarray(train.target, dtype=np.float64)
    n, k = X.shape
    if n == 0:
        raise DataError("cannot fit on an empty dataset")
    A = np.empty((n, k + 1))
    A[:, 0] = 1.0
    A[:, 1:] = X
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return OlsModel(intercept=float(beta[0]), coefs=beta[1:].copy(), n_features=k)


def linear_predict(model: GreedyLsModel | OlsModel, X: Dataset | np.ndarray) -> np.ndarray:
    """Predict with either linear model on a dataset or bare feature matrix."""
    if isinstance(X, Dataset):
        mat = design_matrix(X)[0]
    else:
        mat = np.asarray(X, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != model.n_features:
        raise DataError(
            f"feature matrix has {mat.shape[1] if mat.ndim == 2 else '?'} columns, "
            f"model was trained on {model.n_features}"
        )
    return model.intercept + mat @ model.coefs
