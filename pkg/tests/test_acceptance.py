"""End-to-end acceptance checks, one test per shipped criterion.

Each test computes its measurements first, records a single pass/fail
summary line (printed after the run), and only then asserts.  Two known
shortfalls are deliberately left failing rather than loosened; the
blocking analysis lives in /root/notes/decisions.md.
"""

from __future__ import annotations

import json
import math
import time

import numpy as np
from conftest import record_acceptance

from greedyprune.cli import main as cli_main
from greedyprune.data import SplitPlan, split
from greedyprune.dgp import DgpSpec, generate, snr_for_r2
from greedyprune.ensemble import ensemble_fit, ensemble_predict, make_recipe
from greedyprune.randomization import SeedSpec
from greedyprune.simulation import (
    BOOST_DEPTH_GRID,
    MARS_DEPTH_GRID,
    TREE_DEPTH_GRID,
    SweepSpec,
    compare,
    r2_score,
    run_bench,
    run_fig2,
    run_sweep,
)
from greedyprune.tree import TreeParams, grow, predict as tree_predict

REL_TOL = 1e-10


def _flag(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def test_split_search_matches_exhaustive_enumeration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(52)
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, 4))
        levels = int(rng.integers(2, 6))
        X = rng.integers(0, levels, size=(n, k)).astype(np.float64)
        y = rng.integers(0, 4, size=n).astype(np.float64)

        parent = float(np.sum((y - y.mean()) ** 2))
        best = None
        best_sse = parent
        tol = REL_TOL * parent
        for j in range(k):
            values = np.unique(X[:, j])
            for a, b in zip(values[:-1], values[1:]):
                c = (a + b) / 2.0
                left, right = y[X[:, j] <= c], y[X[:, j] > c]
                sse = float(
                    np.sum((left - left.mean()) ** 2)
                    + np.sum((right - right.mean()) ** 2)
                )
                if sse < best_sse - tol:
                    best_sse = sse
                    best = (j, c)

        from greedyprune.tree import best_split

        s = best_split(np.arange(n), X, y=y)
        got = None if s is None else (s.feature, s.threshold)
        mismatches += got != best
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    record_acceptance(
        f"criterion 1: {_flag(ok)} — split search equals exhaustive enumeration "
        f"on 500 datasets ({500 - mismatches}/500 exact; {elapsed:.1f}s < 10s)"
    )
    assert mismatches == 0
    assert elapsed < 10.0


def test_unpruned_fits_interpolate_and_subsampled_ensemble_keeps_most_fit():
    t0 = time.perf_counter()
    train, _ = generate(
        DgpSpec(kind="friedman1", n=400, snr=4.0, n_test=1, seed=SeedSpec(200, 0))
    )
    tree = grow(train.data, TreeParams(min_node=1, mtry=1.0), SeedSpec(201, 0))
    r2_single = r2_score(train.data.target, tree_predict(tree, train.data))

    spec = make_recipe(
        "rf",
        min_node=1,
        mtry=1.0,
        b_members=100,
        resample_kind="subsample",
        rate=2.0 / 3.0,
        seed=SeedSpec(202, 0),
    )
    model = ensemble_fit(train.data, spec)
    r2_ens = r2_score(train.data.target, model.train_fitted)
    elapsed = time.perf_counter() - t0
    ok = r2_single == 1.0 and r2_ens >= 0.63 and elapsed < 30.0
    record_acceptance(
        f"criterion 2: {_flag(ok)} — single deep tree train R2 = {r2_single:.6f} "
        f"(exact 1), 2/3-subsampled ensemble train R2 = {r2_ens:.4f} >= 0.63 "
        f"({elapsed:.1f}s < 30s)"
    )
    assert r2_single == 1.0
    assert r2_ens >= 0.65 - 0.02
    assert elapsed < 30.0


def test_deep_forest_recovers_constant_mean_nearly_as_well_as_the_average():
    t0 = time.perf_counter()
    ratios = []
    for s in range(20):
        train, test = generate(
            DgpSpec(
                kind="noise_node",
                n=100,
                k_noise=16,
                mu=0.0,
                noise_sd=1.0,
                n_test=200,
                seed=SeedSpec(6000 + s, 0),
            )
        )
        spec = make_recipe(
            "rf", min_node=1, b_members=2000, seed=SeedSpec(6001, s)
        )
        model = ensemble_fit(train.data, spec)
        preds = ensemble_predict(model, test.data)
        mse_rf = float(np.mean((test.data.target - preds) ** 2))
        const = float(train.data.target.mean())
        mse_const = float(np.mean((test.data.target - const) ** 2))
        ratios.append(mse_rf / mse_const)
    mean_ratio = float(np.mean(ratios))
    elapsed = time.perf_counter() - t0
    ok = mean_ratio <= 1.10 and elapsed < 120.0
    record_acceptance(
        f"criterion 3: {_flag(ok)} — deep-forest test MSE vs constant-mean "
        f"predictor: mean ratio {mean_ratio:.4f} <= 1.10 over 20 seeds "
        f"({elapsed:.1f}s < 120s)"
    )
    assert mean_ratio <= 1.10
    assert elapsed < 120.0


def test_bagged_perturbed_depth_sweeps_prune_implicitly():
    t0 = time.perf_counter()
    dgp = DgpSpec(kind="friedman1", n=400, snr=4.0, n_test=500)
    tree_res = run_sweep(
        SweepSpec(
            dgp=dgp,
            family="tree",
            variants=("plain", "bp", "population"),
            depth_grid=TREE_DEPTH_GRID,
            replications=10,
            b_members=50,
            seed=SeedSpec(41, 0),
        )
    )
    boost_res = run_sweep(
        SweepSpec(
            dgp=dgp,
            family="boosting",
            variants=("plain", "bp"),
            depth_grid=BOOST_DEPTH_GRID[:14],
            replications=10,
            b_members=50,
            seed=SeedSpec(42, 0),
        )
    )
    mars_res = run_sweep(
        SweepSpec(
            dgp=dgp,
            family="mars",
            variants=("plain", "bp"),
            depth_grid=MARS_DEPTH_GRID[:12],
            replications=10,
            b_members=50,
            seed=SeedSpec(43, 0),
        )
    )
    elapsed = time.perf_counter() - t0

    plain_tree = tree_res.curve("plain")
    bp_tree = tree_res.curve("bp")
    pop_tree = tree_res.curve("population")
    a_ok = bp_tree[-1] >= max(plain_tree) - 0.02
    b_ok = all(b >= a - 0.01 for a, b in zip(pop_tree, pop_tree[1:]))

    plain_boost = boost_res.curve("plain")
    bp_boost = boost_res.curve("bp")
    boog_ok = bp_boost[-1] >= max(plain_boost) - 0.03

    plain_mars = mars_res.curve("plain")
    bp_mars = mars_res.curve("bp")
    mq_ok = bp_mars[-1] >= max(plain_mars) - 0.03

    ok = a_ok and b_ok and boog_ok and mq_ok and elapsed < 1200.0
    record_acceptance(
        f"criterion 4: {_flag(ok)} — implicit pruning at full depth: "
        f"(a) tree {_flag(a_ok)} (bp@deepest {bp_tree[-1]:.4f} vs plain max "
        f"{max(plain_tree):.4f}); (b) population monotone {_flag(b_ok)}; "
        f"(c) boosting {_flag(boog_ok)} (bp@deepest {bp_boost[-1]:.4f} vs "
        f"plain max {max(plain_boost):.4f}), hinge-regression {_flag(mq_ok)} "
        f"(bp@deepest {bp_mars[-1]:.4f} vs plain max {max(plain_mars):.4f}; "
        f"known shortfall, see /root/notes/decisions.md) "
        f"({elapsed:.0f}s < 1200s)"
    )
    assert a_ok, f"bp tree at deepest {bp_tree[-1]} vs plain max {max(plain_tree)}"
    assert b_ok, f"population curve not weakly increasing: {pop_tree}"
    assert boog_ok, (
        f"bp boosting at deepest {bp_boost[-1]} vs plain max {max(plain_boost)}"
    )
    assert elapsed < 1200.0
    assert mq_ok, (
        f"bp hinge regression at deepest {bp_mars[-1]} vs plain max "
        f"{max(plain_mars)} - 0.03; documented shortfall"
    )


def test_forest_test_fit_improves_monotonically_with_depth():
    t0 = time.perf_counter()
    subgrid = [round(200 ** (1 - i / 9)) for i in range(10)]
    r2_test = np.empty((10, len(subgrid)))
    r2_train = np.empty((10, len(subgrid)))
    for rep in range(10):
        train, test = generate(
            DgpSpec(
                kind="friedman1", n=400, snr=4.0, n_test=500,
                seed=SeedSpec(9500 + rep, 0),
            )
        )
        for gi, m in enumerate(subgrid):
            spec = make_recipe(
                "rf",
                min_node=m,
                b_members=50,
                seed=SeedSpec(9501, rep * len(subgrid) + gi),
            )
            model = ensemble_fit(train.data, spec)
            r2_train[rep, gi] = r2_score(train.data.target, model.train_fitted)
            r2_test[rep, gi] = r2_score(
                test.data.target, ensemble_predict(model, test.data)
            )
    med_test = np.median(r2_test, axis=0)
    med_train = np.median(r2_train, axis=0)
    worst_step = float(np.min(np.diff(med_test)))
    gap = float(med_train[-1] - med_test[-1])
    elapsed = time.perf_counter() - t0
    ok = worst_step >= -0.02 and gap >= 0.1 and elapsed < 600.0
    record_acceptance(
        f"criterion 5: {_flag(ok)} — forest depth descent: worst median test-R2 "
        f"step {worst_step:+.4f} >= -0.02, train-test gap at full depth "
        f"{gap:.3f} >= 0.1 ({elapsed:.0f}s < 600s)"
    )
    assert worst_step >= -0.02
    assert gap >= 0.1
    assert elapsed < 600.0


def test_averaged_greedy_linear_fits_shrug_off_junk_features():
    t0 = time.perf_counter()
    # The single-draw MSE ratio at 90 junk columns is heavy-tailed, so the
    # measurement averages ten replications of the 50x20 configuration.
    points = run_fig2(
        seed=SeedSpec(63, 0),
        grid=(0, 30, 60, 90, 120),
        n_models=50,
        n_bags=20,
        n=100,
        n_test=1000,
        snr=2.0,
        replications=10,
    )
    by_x = {p.n_useless: p for p in points}
    ratio_90 = by_x[90].mse_ols / by_x[90].mse_greedy
    greedy_curve = [p.log_ratio_greedy for p in points]
    drift = max(greedy_curve) - min(greedy_curve)
    elapsed = time.perf_counter() - t0
    ok = ratio_90 >= 5.0 and drift <= 0.5 and elapsed < 300.0
    record_acceptance(
        f"criterion 6: {_flag(ok)} — junk-feature robustness: OLS/greedy test "
        f"MSE ratio at 90 junk columns {ratio_90:.1f} >= 5, greedy log-ratio "
        f"drift {drift:.3f} <= 0.5 ({elapsed:.0f}s < 300s)"
    )
    assert ratio_90 >= 5.0
    assert drift <= 0.5
    assert elapsed < 300.0


def test_full_depth_ensembles_track_tuned_counterparts_on_held_out_data():
    t0 = time.perf_counter()
    boog_wins = mq_wins = 0
    boog_train_min = mq_train_min = math.inf
    for s in range(10):
        sample, _ = generate(
            DgpSpec(
                kind="friedman1",
                n=1000,
                snr=snr_for_r2(0.7),
                n_test=1,
                seed=SeedSpec(9700 + s, 0),
            )
        )
        train, test = split(
            sample.data, SplitPlan(mode="random", train_fraction=0.7, seed=s)
        )
        rows = run_bench(
            train,
            test,
            models=("boost_tuned", "booging", "mars_tuned", "marsquake"),
            b_members=50,
            boost_grid=BOOST_DEPTH_GRID[:14],
            mars_grid=MARS_DEPTH_GRID[:13],
            recipe_overrides={"marsquake": {"max_terms": 40, "restart_floor": None}},
            seed=SeedSpec(9701, s),
        )
        by_name = {r.model: r for r in rows}
        boog_wins += (
            by_name["booging"].r2_test >= by_name["boost_tuned"].r2_test - 0.03
        )
        mq_wins += (
            by_name["marsquake"].r2_test >= by_name["mars_tuned"].r2_test - 0.03
        )
        boog_train_min = min(boog_train_min, by_name["booging"].r2_train)
        mq_train_min = min(mq_train_min, by_name["marsquake"].r2_train)
    elapsed = time.perf_counter() - t0
    boog_ok = boog_wins >= 8 and boog_train_min >= 0.9
    mq_ok = mq_wins >= 8 and mq_train_min >= 0.9
    ok = boog_ok and mq_ok and elapsed < 900.0
    record_acceptance(
        f"criterion 7: {_flag(ok)} — full-depth vs tuned on held-out data: "
        f"bagged boosting {_flag(boog_ok)} ({boog_wins}/10 within 0.03, "
        f"min train R2 {boog_train_min:.4f}); bagged hinge regression "
        f"{_flag(mq_ok)} ({mq_wins}/10 within 0.03, min train R2 "
        f"{mq_train_min:.4f}; known shortfall, see /root/notes/decisions.md) "
        f"({elapsed:.0f}s < 900s)"
    )
    assert boog_wins >= 8
    assert boog_train_min >= 0.9
    assert elapsed < 900.0
    assert mq_wins >= 8, f"{mq_wins}/10; documented shortfall"
    assert mq_train_min >= 0.9, f"{mq_train_min}; documented shortfall"


def test_paired_tests_hold_their_nominal_size():
    t0 = time.perf_counter()
    rng = np.random.default_rng(88)
    rejections = 0
    max_rel = 0.0
    for _ in range(2000):
        a = rng.normal(size=100)
        b = rng.normal(size=100)
        t_rep = compare(a, b, kind="t")
        rejections += t_rep.p_value < 0.05
        if abs(t_rep.statistic) > 0.1:
            dm_rep = compare(a, b, kind="dm", lag=0)
            rel = abs(dm_rep.statistic - t_rep.statistic) / abs(t_rep.statistic)
            max_rel = max(max_rel, rel)
    size = rejections / 2000
    elapsed = time.perf_counter() - t0
    ok = 0.03 <= size <= 0.07 and max_rel <= 0.05 and elapsed < 60.0
    record_acceptance(
        f"criterion 8: {_flag(ok)} — paired-test calibration: empirical size "
        f"{size:.4f} in [0.03, 0.07], max DM-vs-t statistic gap {max_rel:.4f} "
        f"<= 0.05 ({elapsed:.1f}s < 60s)"
    )
    assert 0.03 <= size <= 0.07
    assert max_rel <= 0.05
    assert elapsed < 60.0


def test_rerun_from_echoed_config_is_byte_identical_across_thread_counts(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(
        "dgps = friedman1\n"
        "families = tree,boosting\n"
        "variants = plain,bp\n"
        "n = 60\n"
        "n_test = 40\n"
        "replications = 1\n"
        "b_members = 3\n"
        "tree_grid = 15,5,2\n"
        "boosting_grid = 5,17\n"
        "seed = 11\n"
    )
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    code1 = cli_main(
        ["simulate", "--config", str(cfg), "--out", str(out1), "--threads", "1"]
    )
    code2 = cli_main(
        [
            "simulate",
            "--config",
            str(out1 / "config.echo"),
            "--out",
            str(out2),
            "--threads",
            "8",
        ]
    )
    csvs = sorted(p.name for p in out1.glob("*.csv"))
    identical = [
        name
        for name in csvs
        if (out1 / name).read_bytes() == (out2 / name).read_bytes()
    ]
    manifest1 = json.loads((out1 / "manifest.json").read_text())
    manifest2 = json.loads((out2 / "manifest.json").read_text())
    hashes_match = manifest1["artifacts"] == manifest2["artifacts"]
    ok = (
        code1 == 0
        and code2 == 0
        and len(csvs) == 4
        and identical == csvs
        and hashes_match
    )
    record_acceptance(
        f"criterion 9: {_flag(ok)} — echoed-config rerun at 1 vs 8 threads: "
        f"{len(identical)}/{len(csvs)} CSV artifacts byte-identical, "
        f"manifest hashes equal"
    )
    assert code1 == 0 and code2 == 0
    assert len(csvs) == 4
    assert identical == csvs
    assert hashes_match
