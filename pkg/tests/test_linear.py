"""Stagewise greedy least squares and minimum-norm OLS."""

from __future__ import annotations

import numpy as np
import pytest

from greedyprune.data import Dataset
from greedyprune.errors import ConfigError, DataError
from greedyprune.linear import greedy_ls_fit, linear_predict, ols_fit
from greedyprune.simulation import r2_score


class TestGreedy:
    def test_orthogonal_design_matches_ols(self):
        X = np.array(
            [
                [1.0, 1.0],
                [1.0, -1.0],
                [-1.0, 1.0],
                [-1.0, -1.0],
            ]
        )
        y = np.array([3.0, 1.0, 0.5, -2.0])
        data = Dataset.from_arrays(X, y)
        greedy = greedy_ls_fit(data, steps=2, learning_rate=1.0)
        ols = ols_fit(data)
        assert {j for j, _ in greedy.selections} == {0, 1}
        np.testing.assert_allclose(greedy.coefs, ols.coefs, atol=1e-8)
        assert greedy.intercept == pytest.approx(ols.intercept, abs=1e-8)

    def test_zero_steps_is_mean(self, small_data):
        model = greedy_ls_fit(small_data, steps=0)
        assert np.all(model.coefs == 0.0)
        assert model.intercept == pytest.approx(small_data.target.mean())
        assert model.selections == []

    def test_sse_path_non_increasing(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 8))
        y = X[:, 0] - 2 * X[:, 3] + rng.normal(size=60)
        model = greedy_ls_fit(Dataset.from_arrays(X, y), steps=30)
        Xc = X - X.mean(axis=0)
        r = y - y.mean()
        sse = [float(r @ r)]
        for j, inc in model.selections:
            r = r - inc * Xc[:, j]
            sse.append(float(r @ r))
        assert all(b <= a + 1e-12 for a, b in zip(sse, sse[1:]))
        # Replayed increments reproduce the reported coefficients.
        replay = np.zeros(8)
        for j, inc in model.selections:
            replay[j] += inc
        np.testing.assert_allclose(replay, model.coefs, rtol=1e-10)

    def test_prefers_signal_features(self):
        fracs = []
        for s in range(50):
            rng = np.random.default_rng(3000 + s)
            X = rng.normal(size=(100, 100))
            f = X[:, :10].sum(axis=1)
            y = f + rng.normal(scale=np.sqrt(5.0), size=100)
            model = greedy_ls_fit(Dataset.from_arrays(X, y), steps=5)
            fracs.append(np.mean([j < 10 for j, _ in model.selections]))
        # 10 of 100 features carry signal; uniform selection would hit 0.10.
        assert np.mean(fracs) >= 0.5

    def test_constant_column_never_selected(self):
        rng = np.random.default_rng(9)
        X = np.hstack([np.full((40, 1), 2.0), rng.normal(size=(40, 1))])
        y = 3 * X[:, 1] + rng.normal(size=40)
        model = greedy_ls_fit(Dataset.from_arrays(X, y), steps=10)
        assert all(j == 1 for j, _ in model.selections)
        assert model.coefs[0] == 0.0

    def test_bad_params_rejected(self, small_data):
        with pytest.raises(ConfigError):
            greedy_ls_fit(small_data, steps=-1)
        with pytest.raises(ConfigError):
            greedy_ls_fit(small_data, steps=5, learning_rate=0.0)


class TestOls:
    def test_single_regressor_slope(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=50)
        y = 1.5 * x + rng.normal(size=50)
        model = ols_fit(Dataset.from_arrays(x[:, None], y))
        xc = x - x.mean()
        slope = float(xc @ (y - y.mean())) / float(xc @ xc)
        assert model.coefs[0] == pytest.approx(slope, rel=1e-10)
        assert model.intercept == pytest.approx(y.mean() - slope * x.mean(), rel=1e-10)

    def test_interpolates_at_k_equals_n_minus_one(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 19))
        y = rng.normal(size=20)
        model = ols_fit(Dataset.from_arrays(X, y))
        assert r2_score(y, linear_predict(model, X)) == pytest.approx(1.0, abs=1e-8)

    def test_duplicated_column_splits_weight(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 1))
        X = np.hstack([x, x])
        y = 2 * x[:, 0] + rng.normal(scale=0.1, size=30)
        model = ols_fit(Dataset.from_arrays(X, y))
        assert model.coefs[0] == pytest.approx(model.coefs[1], rel=1e-6)

    def test_overparameterized_trough_versus_oracle(self):
        for s in range(5):
            rng = np.random.default_rng(4000 + s)
            Xtr = rng.normal(size=(100, 100))
            ytr = Xtr[:, :10].sum(axis=1) + rng.normal(scale=np.sqrt(5.0), size=100)
            Xte = rng.normal(size=(1000, 100))
            fte = Xte[:, :10].sum(axis=1)
            full = ols_fit(Dataset.from_arrays(Xtr, ytr))
            oracle = ols_fit(Dataset.from_arrays(Xtr[:, :10], ytr))
            mse_full = np.mean((linear_predict(full, Xte) - fte) ** 2)
            mse_oracle = np.mean((linear_predict(oracle, Xte[:, :10]) - fte) ** 2)
            assert mse_full / mse_oracle >= 20.0

    def test_bagged_coefficients_concentrate_on_ols(self):
        rng = np.random.default_rng(77)
        X = rng.normal(size=(200, 8))
        y = X @ (np.arange(1.0, 9.0) / 4.0) + rng.normal(size=200)
        ref = ols_fit(Dataset.from_arrays(X, y)).coefs

        def bagged_gap(b_members):
            rs = np.random.default_rng(99)
            acc = np.zeros(8)
            for _ in range(b_members):
                rows = rs.integers(0, 200, size=200)
                acc += ols_fit(Dataset.from_arrays(X[rows], y[rows])).coefs
            return float(np.mean(np.abs(acc / b_members - ref)))

        assert bagged_gap(80) < bagged_gap(5) / 2.0

    def test_width_mismatch_rejected(self, small_data):
        model = ols_fit(small_data)
        with pytest.raises(DataError):
            linear_predict(model, np.zeros((2, 9)))
