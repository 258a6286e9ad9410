"""Regression trees.

Exhaustive greedy split search over (feature, threshold) pairs, recursive
growth with per-node candidate-feature sampling, weakest-link
cost-complexity pruning with K-fold cross-validation, and prediction.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import _kernels
from .data import Dataset, design_matrix
from .errors import ConfigError, DataError
from .randomization import (
    SALT_PRUNE_CV,
    SALT_PRUNE_FOLD,
    SALT_TREE,
    SeedSpec,
    feature_count,
    rng_from_key,
)

# Relative SSE margin a candidate cut must clear to displace the incumbent.
# Keeps tie-breaking (lowest feature, then lowest threshold) immune to the
# last-ulp noise that different summation orders produce on exact ties.
REL_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class TreeParams:
    """Growth controls: leaf size floor, per-node feature fraction, depth cap."""

    min_node: int = 1
    mtry: float = 1.0
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if self.min_node < 1:
            raise ConfigError(f"min_node must be >= 1, got {self.min_node}")
        if not 0.0 < self.mtry <= 1.0:
            raise ConfigError(f"mtry must be in (0, 1], got {self.mtry}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")


@dataclasses.dataclass(frozen=True)
class Split:
    """One cut: rows with X[:, feature] <= threshold go left."""

    feature: int
    threshold: float
    mean_left: float
    mean_right: float
    n_left: int
    n_right: int


@dataclasses.dataclass
class TreeModel:
    """Flat-array binary tree; node 0 is the root, children follow preorder.

    feature[i] < 0 marks a leaf; value[i] is the mean of training targets
    routed to node i, count[i] how many there were, sse[i] their sum of
    squared deviations.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    sse: np.ndarray
    depth: np.ndarray
    params: TreeParams
    n_features: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def is_leaf_only(self) -> bool:
        return self.n_nodes == 1


def _as_matrix(data: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(data, Dataset):
        return design_matrix(data)[0]
    return np.ascontiguousarray(np.asarray(data, dtype=np.float64))


def best_split(
    rows: np.ndarray,
    data: Dataset | np.ndarray,
    candidates: np.ndarray | None = None,
    y: np.ndarray | None = None,
    min_child: int = 1,
) -> Split | None:
    """Lowest-SSE cut on the given rows, or None when nothing reduces SSE.

    `candidates` restricts the searched feature columns (default: all);
    ties resolve to the lowest feature index, then the lowest threshold.
    """
    if isinstance(data, Dataset):
        X = design_matrix(data)[0]
        yv = data.target
    else:
        X = np.asarray(data, dtype=np.float64)
        if y is None:
            raise DataError("best_split on a bare matrix needs an explicit target")
        yv = np.asarray(y, dtype=np.float64)
    idx = np.asarray(rows, dtype=np.int64)
    if idx.size < 2:
        raise DataError(f"best_split needs at least 2 rows, got {idx.size}")
    if candidates is None:
        cand = np.arange(X.shape[1], dtype=np.int64)
    else:
        cand = np.sort(np.asarray(candidates, dtype=np.int64))
    Xf = np.asfortranarray(X)
    mean, sse_p, pure = _kernels._node_stats(yv, idx, 0, idx.size)
    if pure:
        return None
    xbuf = np.empty(idx.size, dtype=np.float64)
    ybuf = np.empty(idx.size, dtype=np.float64)
    feat, cut, n_left = _kernels.scan_split(
        Xf, yv, idx, 0, idx.size, cand, min_child, REL_TOL, mean, sse_p, xbuf, ybuf
    )
    if feat < 0:
        return None
    go_left = X[idx, feat] <= cut
    return Split(
        feature=int(feat),
        threshold=float(cut),
        mean_left=float(yv[idx[go_left]].mean()),
        mean_right=float(yv[idx[~go_left]].mean()),
        n_left=int(n_left),
        n_right=int(idx.size - n_left),
    )


def grow_matrix(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams,
    tree_key: int,
    rows: np.ndarray | None = None,
) -> TreeModel:
    """Grow on an explicit matrix/target with an explicit 64-bit key.

    The key feeds per-node candidate-feature draws; nodes are keyed by
    their root-to-node path, so growing deeper never re-randomizes
    shallower splits.
    """
    Xf = np.asfortranarray(np.asarray(X, dtype=np.float64))
    yv = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    if rows is None:
        rows = np.arange(Xf.shape[0], dtype=np.int64)
    else:
        rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise DataError("cannot grow a tree on an empty row set")
    m_feats = feature_count(Xf.shape[1], params.mtry)
    max_depth = -1 if params.max_depth is None else params.max_depth
    feature, threshold, left, right, value, count, sse, depth = _kernels.grow_core(
        Xf,
        yv,
        rows,
        params.min_node,
        max_depth,
        m_feats,
        np.uint64(tree_key),
        REL_TOL,
    )
    return TreeModel(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        count=count,
        sse=sse,
        depth=depth,
        params=params,
        n_features=int(Xf.shape[1]),
    )


def grow(train: Dataset, params: TreeParams, seed: SeedSpec) -> TreeModel:
    """Grow a tree on a Dataset; randomness comes from the seed stream."""
    if train.n_rows == 0:
        raise DataError("cannot grow a tree on an empty dataset")
    X, _ = design_matrix(train)
    return grow_matrix(X, train.target, params, seed.key(SALT_TREE))


def predict(model: TreeModel, X: Dataset | np.ndarray) -> np.ndarray:
    """Route rows to leaves and return leaf means."""
    mat = _as_matrix(X)
    if mat.ndim != 2 or mat.shape[1] != model.n_features:
        raise DataError(
            f"feature matrix has {mat.shape[1] if mat.ndim == 2 else '?'} columns, "
            f"model was trained on {model.n_features}"
        )
    out = np.empty(mat.shape[0], dtype=np.float64)
    _kernels.route_mean(
        mat, model.feature, model.threshold, model.left, model.right, model.value, out
    )
    return out


def _predict_collapsed(model: TreeModel, mat: np.ndarray, collapsed: np.ndarray) -> np.ndarray:
    out = np.empty(mat.shape[0], dtype=np.float64)
    _kernels.route_mean_collapsed(
        mat,
        model.feature,
        model.threshold,
        model.left,
        model.right,
        model.value,
        collapsed,
        out,
    )
    return out


def weakest_link(model: TreeModel) -> tuple[np.ndarray, np.ndarray]:
    """Critical complexity values for every node.

    Returns (crit, alphas): crit[i] is the penalty level at which node i's
    split disappears from the pruned tree (inf for leaves), and alphas is
    the ascending sequence of distinct collapse levels.  A node collapses
    together with any still-active node tied with the round minimum, and
    internal descendants of a collapsing node vanish at the same level.
    """
    n = model.n_nodes
    internal = model.feature >= 0
    crit = np.full(n, math.inf)
    if not internal.any():
        return crit, np.zeros(0)
    sub_sse = model.sse.copy()
    sub_leaves = np.ones(n, dtype=np.int64)
    # Children always carry larger ids than their parent (preorder with
    # incremental id assignment), so one reverse pass aggregates subtrees.
    for i in range(n - 1, -1, -1):
        if internal[i]:
            l, r = model.left[i], model.right[i]
            sub_sse[i] = sub_sse[l] + sub_sse[r]
            sub_leaves[i] = sub_leaves[l] + sub_leaves[r]

    parent = np.full(n, -1, dtype=np.int64)
    parent[model.left[internal]] = np.flatnonzero(internal)
    parent[model.right[internal]] = np.flatnonzero(internal)

    active = internal.copy()
    alphas: list[float] = []
    last = 0.0
    while active.any():
        g = np.full(n, math.inf)
        ids = np.flatnonzero(active)
        g[ids] = (model.sse[ids] - sub_sse[ids]) / (sub_leaves[ids] - 1)
        a = float(g[ids].min())
        alpha = max(a, last, 0.0)
        thr = a + 1e-12 * (1.0 + abs(a))
        for t in np.flatnonzero(active & (g <= thr)):
            if not active[t]:
                continue  # already gone as a descendant of an earlier tie
            old_sse, old_leaves = sub_sse[t], sub_leaves[t]
            stack = [int(t)]
            while stack:
                u = stack.pop()
                if active[u]:
                    active[u] = False
                    crit[u] = alpha
                    stack.append(int(model.left[u]))
                    stack.append(int(model.right[u]))
            sub_sse[t] = model.sse[t]
            sub_leaves[t] = 1
            d_sse = model.sse[t] - old_sse
            d_leaves = 1 - old_leaves
            p = parent[t]
            while p >= 0:
                sub_sse[p] += d_sse
                sub_leaves[p] += d_leaves
                p = parent[p]
        if not alphas or alpha > alphas[-1]:
            alphas.append(alpha)
        last = alpha
    return crit, np.asarray(alphas)


def prune_at(model: TreeModel, alpha: float) -> TreeModel:
    """Subtree for penalty alpha: splits with crit <= alpha are collapsed."""
    crit, _ = weakest_link(model)
    collapsed = crit <= alpha
    keep_leaf = collapsed | (model.feature < 0)
    # Rebuild compact preorder arrays.
    feature, threshold, left, right = [], [], [], []
    value, count, sse, depth = [], [], [], []
    stack = [(0, -1, False)]  # (old id, new parent id, is_right)
    while stack:
        old, par, is_right = stack.pop()
        new = len(feature)
        if par >= 0:
            if is_right:
                right[par] = new
            else:
                left[par] = new
        if keep_leaf[old]:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
        else:
            feature.append(int(model.feature[old]))
            threshold.append(float(model.threshold[old]))
            left.append(-1)
            right.append(-1)
            stack.append((int(model.right[old]), new, True))
            stack.append((int(model.left[old]), new, False))
        value.append(float(model.value[old]))
        count.append(int(model.count[old]))
        sse.append(float(model.sse[old]))
        depth.append(int(model.depth[old]))
    return TreeModel(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value),
        count=np.asarray(count, dtype=np.int64),
        sse=np.asarray(sse),
        depth=np.asarray(depth, dtype=np.int64),
        params=model.params,
        n_features=model.n_features,
    )


def cost_complexity_prune(
    model: TreeModel, train: Dataset, folds: int = 10, seed: SeedSpec | None = None
) -> TreeModel:
    """Weakest-link pruning with the penalty chosen by K-fold CV on MSE.

    Candidate penalties are 0, the geometric midpoints of the tree's own
    collapse sequence, and infinity; no one-SE adjustment.  Exact CV ties
    resolve toward the larger penalty (the smaller tree).  Leaf values are
    full-training-sample means already, so the winning subtree needs no
    refit.
    """
    if folds < 2:
        raise ConfigError(f"folds must be >= 2, got {folds}")
    if model.is_leaf_only():
        return model
    seed = seed if seed is not None else SeedSpec(0)
    _, alphas = weakest_link(model)
    cands = [0.0]
    for i in range(len(alphas) - 1):
        cands.append(math.sqrt(alphas[i] * alphas[i + 1]))
    cands.append(math.inf)

    X, _ = design_matrix(train)
    y = train.target
    n = train.n_rows
    k = min(folds, n)
    perm = rng_from_key(seed.key(SALT_PRUNE_CV)).permutation(n)
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    bounds = np.concatenate(([0], np.cumsum(sizes)))

    cv_sse = np.zeros(len(cands))
    mat = np.ascontiguousarray(X)
    for f in range(k):
        held = np.sort(perm[bounds[f] : bounds[f + 1]])
        kept = np.sort(np.concatenate((perm[: bounds[f]], perm[bounds[f + 1] :])))
        fold_tree = grow_matrix(
            X[kept], y[kept], model.params, seed.key(SALT_PRUNE_FOLD, f)
        )
        crit_f, _ = weakest_link(fold_tree)
        for ci, alpha in enumerate(cands):
            mask = (crit_f <= alpha).astype(np.uint8)
            pred = _predict_collapsed(fold_tree, mat[held], mask)
            cv_sse[ci] += float(np.sum((y[held] - pred) ** 2))

    best_ci = 0
    for ci in range(1, len(cands)):
        if cv_sse[ci] <= cv_sse[best_ci]:
            best_ci = ci
    return prune_at(model, cands[best_ci])
