"""Stochastic gradient boosting with shallow tree stages under squared loss."""

from __future__ import annotations

import dataclasses

import numpy as np

from .data import Dataset, design_matrix
from .errors import ConfigError, DataError
from .randomization import (
    SALT_LEARNER,
    SALT_STAGE_ROWS,
    SALT_STAGE_TREE,
    SeedSpec,
    ceil_count,
    mix64,
    rng_from_key,
)
from .tree import TreeModel, TreeParams, grow_matrix, predict as tree_predict


@dataclasses.dataclass(frozen=True)
class BoostParams:
    steps: int = 1000
    learning_rate: float = 0.1
    subsample: float = 0.5
    interaction_depth: int = 3
    min_node: int = 1
    mtry: float = 1.0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigError(f"subsample must be in (0, 1], got {self.subsample}")
        if self.interaction_depth < 1:
            raise ConfigError(
                f"interaction_depth must be >= 1, got {self.interaction_depth}"
            )


@dataclasses.dataclass
class BoostModel:
    """intercept + learning_rate * sum of stage-tree predictions."""

    intercept: float
    learning_rate: float
    stages: list[TreeModel]
    params: BoostParams
    n_features: int
    train_mse_path: np.ndarray  # training MSE after each stage

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def boost_fit_matrix(X: np.ndarray, y: np.ndarray, params: BoostParams, base_key: int) -> BoostModel:
    """Stagewise fit on an explicit matrix with an explicit 64-bit key.

    Stage t draws a fresh without-replacement row subset and grows a
    depth-limited tree on the current residuals over those rows; the fit
    F is then advanced on ALL rows.  F is accumulated exactly the way
    boost_predict accumulates it, so partial evaluation at any stage
    count is bit-identical to the recorded trajectory.
    """
    Xf = np.asfortranarray(np.asarray(X, dtype=np.float64))
    Xc = np.ascontiguousarray(Xf)
    yv = np.asarray(y, dtype=np.float64)
    n = yv.shape[0]
    if n == 0:
        raise DataError("cannot boost on an empty dataset")
    stage_params = TreeParams(
        min_node=params.min_node,
        mtry=params.mtry,
        max_depth=params.interaction_depth,
    )
    m_rows = ceil_count(params.subsample, n)
    intercept = float(yv.mean())
    F = np.full(n, intercept)
    stages: list[TreeModel] = []
    mse_path = np.empty(params.steps)
    for t in range(params.steps):
        if m_rows == n:
            rows = np.arange(n, dtype=np.int64)
        else:
            rng = rng_from_key(mix64(base_key, SALT_STAGE_ROWS, t))
            rows = np.sort(rng.choice(n, size=m_rows, replace=False)).astype(np.int64)
        resid = yv - F
        stage = grow_matrix(
            Xf, resid, stage_params, mix64(base_key, SALT_STAGE_TREE, t), rows=rows
        )
        stages.append(stage)
        F += params.learning_rate * tree_predict(stage, Xc)
        mse_path[t] = float(np.mean((yv - F) ** 2))
    return BoostModel(
        intercept=intercept,
        learning_rate=params.learning_rate,
        stages=stages,
        params=params,
        n_features=int(Xf.shape[1]),
        train_mse_path=mse_path,
    )


def boost_fit(train: Dataset, params: BoostParams, seed: SeedSpec) -> BoostModel:
    X, _ = design_matrix(train)
    return boost_fit_matrix(X, train.target, params, seed.key(SALT_LEARNER))


def _check_matrix(model: BoostModel, X: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(X, Dataset):
        mat = design_matrix(X)[0]
    else:
        mat = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if mat.ndim != 2 or mat.shape[1] != model.n_features:
        raise DataError(
            f"feature matrix has {mat.shape[1] if mat.ndim == 2 else '?'} columns, "
            f"model was trained on {model.n_features}"
        )
    return mat


def boost_predict(
    model: BoostModel, X: Dataset | np.ndarray, n_stages: int | None = None
) -> np.ndarray:
    """Additive evaluation; n_stages truncates to the first stages."""
    mat = _check_matrix(model, X)
    use = model.n_stages if n_stages is None else n_stages
    if not 0 <= use <= model.n_stages:
        raise ConfigError(f"n_stages must be in [0, {model.n_stages}], got {use}")
    F = np.full(mat.shape[0], model.intercept)
    for stage in model.stages[:use]:
        F += model.learning_rate * tree_predict(stage, mat)
    return F


def boost_trajectory(
    model: BoostModel, X: Dataset | np.ndarray, checkpoints: list[int]
) -> np.ndarray:
    """Predictions after each checkpointed stage count, in one pass.

    Returns an array of shape (len(checkpoints), n_rows); checkpoints must
    be ascending and within the fitted stage count.  Row i is bit-identical
    to boost_predict(model, X, n_stages=checkpoints[i]).
    """
    mat = _check_matrix(model, X)
    if any(b < a for a, b in zip(checkpoints, checkpoints[1:])) or (
        checkpoints and not 0 <= checkpoints[0] <= checkpoints[-1] <= model.n_stages
    ):
        raise ConfigError(f"checkpoints must ascend within [0, {model.n_stages}]")
    out = np.empty((len(checkpoints), mat.shape[0]))
    F = np.full(mat.shape[0], model.intercept)
    pos = 0
    for ci, c in enumerate(checkpoints):
        while pos < c:
            F += model.learning_rate * tree_predict(model.stages[pos], mat)
            pos += 1
        out[ci] = F
    return out
