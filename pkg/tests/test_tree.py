"""CART split search, growth, prediction, and cost-complexity pruning."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedyprune.data import Dataset
from greedyprune.errors import DataError
from greedyprune.dgp import DgpSpec, generate
from greedyprune.randomization import SeedSpec
from greedyprune.tree import (
    TreeParams,
    best_split,
    cost_complexity_prune,
    grow,
    grow_matrix,
    predict,
    prune_at,
)


REL_TOL = 1e-10


def brute_force_best(X, y, rows):
    """Enumerate every (feature, midpoint) cut; lowest SSE wins, ties kept at
    the lowest feature then lowest threshold; None when nothing beats the
    parent SSE by more than the relative tolerance."""
    Xs, ys = X[rows], y[rows]
    parent_sse = float(np.sum((ys - ys.mean()) ** 2))
    best_sse = parent_sse
    tol = REL_TOL * parent_sse
    best = None
    for j in range(X.shape[1]):
        values = np.unique(Xs[:, j])
        for a, b in zip(values[:-1], values[1:]):
            c = (a + b) / 2.0
            left = ys[Xs[:, j] <= c]
            right = ys[Xs[:, j] > c]
            if len(left) == 0 or len(right) == 0:
                continue
            sse = float(
                np.sum((left - left.mean()) ** 2) + np.sum((right - right.mean()) ** 2)
            )
            if sse < best_sse - tol:
                best_sse = sse
                best = (sse, j, c)
    return best


class TestBestSplit:
    def test_separable_example(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        s = best_split(np.arange(4), X, y=y)
        assert s is not None
        assert s.feature == 0
        assert s.threshold == 0.0
        assert s.mean_left == 0.0 and s.mean_right == 1.0
        assert s.n_left == 2 and s.n_right == 2

    def test_constant_target_gives_none(self):
        X = np.arange(6.0).reshape(6, 1)
        y = np.full(6, 3.5)
        assert best_split(np.arange(6), X, y=y) is None

    def test_single_row_rejected(self):
        X = np.array([[1.0]])
        with pytest.raises(DataError):
            best_split(np.arange(1), X, y=np.array([2.0]))

    def test_matches_brute_force_eight_points(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(size=(8, 2))
        y = rng.normal(size=8)
        s = best_split(np.arange(8), X, y=y)
        sse, j, c = brute_force_best(X, y, np.arange(8))
        assert s.feature == j
        assert s.threshold == pytest.approx(c, abs=0.0)

    @given(
        n=st.integers(min_value=2, max_value=12),
        k=st.integers(min_value=1, max_value=3),
        seed=st.integers(min_value=0, max_value=10_000),
        levels=st.integers(min_value=2, max_value=5),
    )
    @settings(max_examples=80, deadline=None)
    def test_matches_brute_force_random(self, n, k, seed, levels):
        rng = np.random.default_rng(seed)
        # Coarse value grids force duplicated values and ties.
        X = rng.integers(0, levels, size=(n, k)).astype(np.float64)
        y = rng.integers(0, 3, size=n).astype(np.float64)
        s = best_split(np.arange(n), X, y=y)
        oracle = brute_force_best(X, y, np.arange(n))
        if oracle is None:
            assert s is None
        else:
            sse, j, c = oracle
            assert s is not None
            assert (s.feature, s.threshold) == (j, c)


class TestGrow:
    def test_interpolates_distinct_rows(self, small_data):
        model = grow(small_data, TreeParams(min_node=1), SeedSpec(0, 0))
        assert np.array_equal(predict(model, small_data), small_data.target)

    def test_min_node_n_is_single_leaf(self, small_data):
        n = len(small_data.target)
        model = grow(small_data, TreeParams(min_node=n), SeedSpec(0, 0))
        assert model.n_nodes == 1
        got = predict(model, small_data)
        assert np.allclose(got, small_data.target.mean())

    def test_min_node_forty_respected_on_tree_dgp(self):
        train, _ = generate(
            DgpSpec(kind="tree", n=400, snr=4.0, n_test=10, seed=SeedSpec(1, 0))
        )
        model = grow(train.data, TreeParams(min_node=40), SeedSpec(2, 0))
        leaf = model.feature < 0
        assert model.count[leaf].min() >= 40

    def test_children_respect_min_node(self, small_data):
        model = grow(small_data, TreeParams(min_node=7), SeedSpec(0, 0))
        leaf = model.feature < 0
        assert model.count[leaf].min() >= 7

    def test_mtry_one_consumes_no_randomness(self, small_data):
        a = grow(small_data, TreeParams(min_node=2), SeedSpec(0, 0))
        b = grow(small_data, TreeParams(min_node=2), SeedSpec(99, 7))
        assert np.array_equal(predict(a, small_data), predict(b, small_data))

    def test_duplicate_feature_tie_breaks_low_index(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(size=(30, 1))
        X = np.hstack([x, x])
        y = (x[:, 0] > 0.5).astype(np.float64)
        model = grow_matrix(X, y, TreeParams(min_node=5), 0)
        assert model.feature[0] == 0

    def test_deeper_limit_preserves_shallow_splits(self, small_data):
        params = dict(min_node=1, mtry=0.5)
        shallow = grow(small_data, TreeParams(max_depth=2, **params), SeedSpec(11, 3))
        deep = grow(small_data, TreeParams(max_depth=5, **params), SeedSpec(11, 3))
        kept = deep.depth <= 2
        internal = kept & (deep.feature >= 0) & (deep.depth < 2)
        pairs = {
            (int(f), float(t))
            for f, t in zip(deep.feature[internal], deep.threshold[internal])
        }
        shallow_internal = shallow.feature >= 0
        shallow_pairs = {
            (int(f), float(t))
            for f, t in zip(
                shallow.feature[shallow_internal],
                shallow.threshold[shallow_internal],
            )
        }
        assert shallow_pairs == pairs

    def test_child_sse_never_exceeds_parent(self, small_data):
        model = grow(small_data, TreeParams(min_node=2), SeedSpec(5, 0))
        internal = np.flatnonzero(model.feature >= 0)
        for i in internal:
            child_sum = model.sse[model.left[i]] + model.sse[model.right[i]]
            assert child_sum <= model.sse[i] + 1e-9 * max(model.sse[i], 1.0)


class TestPredict:
    def test_training_rows_hit_leaf_means(self, small_data):
        model = grow(small_data, TreeParams(min_node=10), SeedSpec(0, 0))
        preds = predict(model, small_data)
        leaves = {}
        for i, p in enumerate(preds):
            leaves.setdefault(round(p, 12), []).append(small_data.target[i])
        for mean_value, members in leaves.items():
            assert np.mean(members) == pytest.approx(mean_value, rel=1e-9)

    def test_depth_two_sign_cells(self):
        thetas = {(0, 0): -3.0, (0, 1): -1.0, (1, 0): 2.0, (1, 1): 5.0}
        rows = []
        ys = []
        for s1 in (0, 1):
            for s2 in (0, 1):
                for r in range(5):
                    x1 = (1.0 if s1 else -1.0) * (1 + 0.1 * r)
                    x2 = (1.0 if s2 else -1.0) * (1 + 0.1 * r)
                    rows.append([x1, x2])
                    ys.append(thetas[(s1, s2)])
        data = Dataset.from_arrays(np.asarray(rows), np.asarray(ys))
        model = grow(data, TreeParams(min_node=1, max_depth=2), SeedSpec(0, 0))
        corners = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
        got = predict(model, corners)
        want = [thetas[(0, 0)], thetas[(0, 1)], thetas[(1, 0)], thetas[(1, 1)]]
        assert np.array_equal(got, want)

    def test_monotone_feature_transform_invariance(self):
        rng = np.random.default_rng(17)
        X = rng.uniform(size=(50, 2))
        y = rng.normal(size=50)
        Xq = rng.uniform(size=(20, 2))
        base = predict(grow_matrix(X, y, TreeParams(min_node=3), 7), Xq)
        warp = lambda A: np.stack([np.exp(A[:, 0]), A[:, 1] ** 3], axis=1)
        warped = predict(grow_matrix(warp(X), y, TreeParams(min_node=3), 7), warp(Xq))
        assert np.array_equal(base, warped)

    @given(seed=st.integers(min_value=0, max_value=5000))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(size=(30, 2))
        y = rng.normal(size=30)
        model = grow_matrix(X, y, TreeParams(min_node=4), 0)
        leaf = model.feature < 0
        assert model.count[leaf].sum() == 30
        preds = predict(model, X)
        # Rows predicted the same value share a leaf; its value is their mean.
        for value in np.unique(preds):
            members = y[preds == value]
            assert np.mean(members) == pytest.approx(value, rel=1e-9, abs=1e-12)


class TestPrune:
    def test_pure_noise_prunes_to_root(self):
        roots = 0
        for s in range(20):
            rng = np.random.default_rng(1000 + s)
            data = Dataset.from_arrays(
                rng.uniform(size=(120, 3)), rng.normal(size=120)
            )
            full = grow(data, TreeParams(min_node=1), SeedSpec(s, 0))
            pruned = cost_complexity_prune(full, data, folds=10, seed=SeedSpec(s, 1))
            roots += pruned.n_nodes == 1
        assert roots >= 15

    def test_noiseless_separable_keeps_full_fit(self):
        X = np.arange(16.0).reshape(16, 1)
        y = (X[:, 0] >= 8).astype(np.float64) * 2.0
        data = Dataset.from_arrays(X, y)
        full = grow(data, TreeParams(min_node=1), SeedSpec(0, 0))
        pruned = cost_complexity_prune(full, data, folds=4, seed=SeedSpec(0, 1))
        assert np.array_equal(predict(pruned, data), y)

    def test_alpha_infinity_collapses_to_root(self, small_data):
        full = grow(small_data, TreeParams(min_node=1), SeedSpec(0, 0))
        assert prune_at(full, math.inf).n_nodes == 1

    def test_alpha_zero_keeps_everything(self, small_data):
        full = grow(small_data, TreeParams(min_node=1), SeedSpec(0, 0))
        kept = prune_at(full, 0.0)
        assert np.array_equal(predict(kept, small_data), predict(full, small_data))
