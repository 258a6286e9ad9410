"""Experiment drivers: depth sweeps, the useless-regressor desk, benchmarks.

The sweep driver scores three ensembling variants of a learner family over a
grid of depth budgets.  Depth is whatever knob makes the family more complex:
shrinking ``min_node`` for trees, adding ``steps`` for boosting, raising
``max_terms`` for hinge regression.  For boosting and hinge regression every
budget on the grid is recovered from one maximally deep fit per member
(stage trajectories and forward-pass snapshots are bit-identical to refits
at the smaller budget), so a fifteen-cell curve costs one fit.

``compare`` supplies the paired significance tests used by the benchmark
table, and ``run_fig2`` reproduces the averaged-predictor desk where greedy
univariate least squares is nearly immune to junk features that send
ordinary least squares through an interpolation spike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from statistics import median
from typing import Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .boosting import BoostParams, boost_fit_matrix, boost_predict, boost_trajectory
from .data import Dataset, _fmt, design_matrix, outlier_filter
from .dgp import DgpSpec, generate
from .ensemble import (
    AugmentConfig,
    EnsembleSpec,
    PerturbConfig,
    ensemble_fit,
    ensemble_predict,
    make_recipe,
    member_view,
)
from .errors import ConfigError, LearnerError
from .linear import greedy_ls_fit, linear_predict, ols_fit
from .mars import (
    MarsParams,
    mars_fit_matrix,
    mars_predict,
    predict_snapshot,
    snapshot_for_budget,
    term_matrix,
)
from .randomization import (
    SALT_BENCH,
    SALT_DATA_POOL,
    SALT_FIG2,
    SALT_LEARNER,
    SALT_PRUNE_CV,
    SALT_PRUNE_FOLD,
    SALT_REP,
    SALT_VARIANT,
    ResamplePlan,
    SeedSpec,
    draw_indices,
    rng_from_key,
)
from .tree import TreeParams, cost_complexity_prune, grow, grow_matrix
from .tree import predict as tree_predict

SWEEP_FAMILIES = ("tree", "boosting", "mars")
VARIANT_NAMES = ("plain", "bp", "population")

#: Per-split feature fraction used by every tree in the sweeps, plain and
#: bagged alike, so both variants walk the same depth axis.
SWEEP_TREE_MTRY = 0.9


# ---------------------------------------------------------------------------
# metrics and grids


def r2_score(target: np.ndarray, pred: np.ndarray) -> float:
    """1 minus SSE over centered total sum of squares.

    A constant target is a degenerate denominator: exact predictions score
    1.0 and anything else scores -inf, so the value still orders models.
    """
    target = np.asarray(target, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    sse = float(np.sum((target - pred) ** 2))
    tss = float(np.sum((target - target.mean()) ** 2))
    if tss <= 0.0:
        return 1.0 if sse == 0.0 else float("-inf")
    return 1.0 - sse / tss


def geometric_grid(base: float, first: int, last: int) -> tuple[int, ...]:
    """Rounded powers base**e for e from first to last inclusive, deduplicated."""
    if base <= 1.0:
        raise ConfigError(f"grid base must exceed 1, got {base}")
    step = 1 if last >= first else -1
    out: list[int] = []
    for e in range(first, last + step, step):
        v = int(round(base**e))
        if not out or v != out[-1]:
            out.append(v)
    return tuple(out)


def log_range_grid(start: int, stop: int, steps: int) -> tuple[int, ...]:
    """``steps`` log-spaced integers from start to stop inclusive, deduplicated."""
    if min(start, stop) < 1 or steps < 2:
        raise ConfigError("log_range_grid needs endpoints >= 1 and steps >= 2")
    levels = np.exp(np.linspace(math.log(start), math.log(stop), steps))
    out: list[int] = []
    for v in levels:
        r = int(round(float(v)))
        if not out or r != out[-1]:
            out.append(r)
    return tuple(out)


#: min_node ladder, deepest budget last (15 cells, 218 down to 2).
TREE_DEPTH_GRID = geometric_grid(1.4, 16, 2)
#: boosting step ladder, ascending (15 cells, 5 up to 1478).
BOOST_DEPTH_GRID = geometric_grid(1.5, 4, 18)
#: hinge-regression term-budget ladder, ascending (15 cells, 2 up to 218).
MARS_DEPTH_GRID = geometric_grid(1.4, 2, 16)


def default_depth_grid(family: str) -> tuple[int, ...]:
    if family == "tree":
        return TREE_DEPTH_GRID
    if family == "boosting":
        return BOOST_DEPTH_GRID
    if family == "mars":
        return MARS_DEPTH_GRID
    raise ConfigError(f"unknown sweep family {family!r}; expected one of {SWEEP_FAMILIES}")


def _validate_grid(family: str, grid: Sequence[int]) -> tuple[int, ...]:
    grid = tuple(int(d) for d in grid)
    if not grid:
        raise ConfigError("depth grid must be nonempty")
    if any(d < 1 for d in grid):
        raise ConfigError(f"depth grid entries must be >= 1, got {grid}")
    if family == "tree":
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("tree depth grid is a min_node ladder and must descend")
    else:
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"{family} depth grid must ascend")
    return grid


# ---------------------------------------------------------------------------
# sweep types


@dataclass(frozen=True)
class SweepSpec:
    """One learner family, up to three variants, a depth grid, R replications."""

    dgp: DgpSpec
    family: str
    variants: tuple[str, ...] = VARIANT_NAMES
    depth_grid: tuple[int, ...] = ()
    replications: int = 30
    b_members: int = 100
    seed: SeedSpec = SeedSpec(0, 0)

    def __post_init__(self) -> None:
        if self.family not in SWEEP_FAMILIES:
            raise ConfigError(
                f"unknown sweep family {self.family!r}; expected one of {SWEEP_FAMILIES}"
            )
        variants = tuple(self.variants)
        if not variants or any(v not in VARIANT_NAMES for v in variants):
            raise ConfigError(
                f"variants must be a nonempty subset of {VARIANT_NAMES}, got {variants}"
            )
        if len(set(variants)) != len(variants):
            raise ConfigError(f"duplicate variants in {variants}")
        object.__setattr__(self, "variants", variants)
        if self.depth_grid:
            object.__setattr__(
                self, "depth_grid", _validate_grid(self.family, self.depth_grid)
            )
        else:
            object.__setattr__(self, "depth_grid", default_depth_grid(self.family))
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.b_members < 1:
            raise ConfigError(f"b_members must be >= 1, got {self.b_members}")


@dataclass(frozen=True)
class SweepRecord:
    variant: str
    depth: int
    rep: int
    r2_true_test: float
    r2_train: float
    r2_test: float


_SWEEP_METRICS = ("r2_true_test", "r2_train", "r2_test")


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    records: tuple[SweepRecord, ...]

    def cell(self, variant: str, depth: int, metric: str = "r2_true_test") -> list[float]:
        if metric not in _SWEEP_METRICS:
            raise ConfigError(f"unknown metric {metric!r}; expected one of {_SWEEP_METRICS}")
        vals = [
            getattr(r, metric)
            for r in self.records
            if r.variant == variant and r.depth == depth
        ]
        if not vals:
            raise ConfigError(f"no records for variant={variant!r} depth={depth}")
        return vals

    def curve(
        self, variant: str, metric: str = "r2_true_test", stat: str = "median"
    ) -> list[float]:
        """Per-depth aggregate across replications, in grid order."""
        if stat not in ("median", "mean"):
            raise ConfigError(f"stat must be 'median' or 'mean', got {stat!r}")
        agg = median if stat == "median" else (lambda v: sum(v) / len(v))
        return [agg(self.cell(variant, d, metric)) for d in self.spec.depth_grid]


def write_sweep_csv(result: SweepResult, path) -> None:
    """Long-form records, one row per (variant, depth, rep)."""
    lines = ["variant,depth,rep,r2_true_test,r2_train,r2_test"]
    for r in result.records:
        lines.append(
            f"{r.variant},{r.depth},{r.rep},"
            f"{_fmt(r.r2_true_test)},{_fmt(r.r2_train)},{_fmt(r.r2_test)}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sweep_summary_csv(result: SweepResult, path) -> None:
    """Per-cell median and mean of every metric, in (variant, depth) order."""
    cols = [f"{s}_{m}" for m in _SWEEP_METRICS for s in ("median", "mean")]
    lines = ["variant,depth," + ",".join(cols)]
    for variant in result.spec.variants:
        for depth in result.spec.depth_grid:
            vals = []
            for metric in _SWEEP_METRICS:
                cell = result.cell(variant, depth, metric)
                vals.append(_fmt(median(cell)))
                vals.append(_fmt(sum(cell) / len(cell)))
            lines.append(f"{variant},{depth}," + ",".join(vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# sweep driver


def _population_plan(b_members: int) -> ResamplePlan:
    return ResamplePlan(kind="population", rate=1.0, b_members=b_members)


def _tree_cells(
    variant: str,
    grid: tuple[int, ...],
    train: Dataset,
    test: Dataset,
    pool: Dataset | None,
    b_members: int,
    vseed: SeedSpec,
    threads: int,
):
    """Per-depth (train_pred, test_pred, train_target) triples for one variant.

    Trees are refit per depth cell: a larger ``min_node`` does not just stop
    earlier, it also rules out splits with small children, so deeper trees
    are not extensions of shallower ones.  The member seed is shared across
    cells, which aligns row draws and per-node candidate streams along the
    depth axis and keeps the curves smooth.
    """
    Xtr, _ = design_matrix(train)
    Xte, _ = design_matrix(test)
    out = []
    if variant == "plain":
        key = vseed.key(SALT_LEARNER)
        for d in grid:
            params = TreeParams(min_node=d, mtry=SWEEP_TREE_MTRY)
            model = grow_matrix(Xtr, train.target, params, key)
            out.append(
                (tree_predict(model, Xtr), tree_predict(model, Xte), train.target)
            )
        return out
    if variant == "bp":
        for d in grid:
            espec = make_recipe(
                "rf",
                mtry=SWEEP_TREE_MTRY,
                min_node=d,
                b_members=b_members,
                seed=vseed,
            )
            model = ensemble_fit(train, espec, threads=threads)
            out.append(
                (model.train_fitted, ensemble_predict(model, test), train.target)
            )
        return out
    for d in grid:  # population
        espec = EnsembleSpec(
            base="tree",
            base_params=TreeParams(min_node=d, mtry=SWEEP_TREE_MTRY),
            resample=_population_plan(b_members),
            perturb=PerturbConfig(),
            augment=AugmentConfig(),
            seed=vseed,
        )
        model = ensemble_fit(pool, espec, threads=threads)
        out.append((model.train_fitted, ensemble_predict(model, test), pool.target))
    return out


def _member_trajectories(model, train: Dataset, test: Dataset, grid, evaluate):
    """Sum per-member budget trajectories in member order, then divide.

    ``evaluate(member_model, X)`` returns a (len(grid), n_rows) array; the
    running sums add members in index order, matching the float addition
    order of ``ensemble_predict`` at each budget.
    """
    n_members = len(model.members)
    tot_tr = np.zeros((len(grid), train.n_rows))
    tot_te = np.zeros((len(grid), test.n_rows))
    for b in range(n_members):
        view_tr = member_view(model, b, train)
        view_te = member_view(model, b, test)
        tot_tr += evaluate(model.members[b].model, design_matrix(view_tr)[0])
        tot_te += evaluate(model.members[b].model, design_matrix(view_te)[0])
    return tot_tr / n_members, tot_te / n_members


def _boost_cells(variant, grid, train, test, pool, b_members, vseed, threads):
    """Budget curves for boosting; every cell comes from stage truncation."""
    params = BoostParams(
        steps=grid[-1], learning_rate=0.1, subsample=0.5, interaction_depth=3
    )
    checkpoints = list(grid)

    def evaluate(member_model, X):
        return boost_trajectory(member_model, X, checkpoints)

    if variant == "plain":
        Xtr, _ = design_matrix(train)
        Xte, _ = design_matrix(test)
        model = boost_fit_matrix(Xtr, train.target, params, vseed.key(SALT_LEARNER))
        traj_tr = boost_trajectory(model, Xtr, checkpoints)
        traj_te = boost_trajectory(model, Xte, checkpoints)
        return [(traj_tr[i], traj_te[i], train.target) for i in range(len(grid))]
    if variant == "bp":
        espec = make_recipe(
            "booging", steps=grid[-1], b_members=b_members, seed=vseed
        )
        model = ensemble_fit(train, espec, threads=threads)
        mean_tr, mean_te = _member_trajectories(model, train, test, grid, evaluate)
        return [(mean_tr[i], mean_te[i], train.target) for i in range(len(grid))]
    espec = EnsembleSpec(
        base="boosting",
        base_params=params,
        resample=_population_plan(b_members),
        perturb=PerturbConfig(),
        augment=AugmentConfig(),
        seed=vseed,
    )
    model = ensemble_fit(pool, espec, threads=threads)
    mean_tr, mean_te = _member_trajectories(model, pool, test, grid, evaluate)
    return [(mean_tr[i], mean_te[i], pool.target) for i in range(len(grid))]


def _mars_cells(variant, grid, train, test, pool, b_members, vseed, threads):
    """Budget curves for hinge regression via forward-pass snapshots.

    Restarting on a low train fit is disabled for the bagged variant here:
    a restarted model has no snapshot ladder, and the depth axis must mean
    the same thing in every cell.
    """
    params = MarsParams(max_terms=grid[-1], max_degree=3)

    def evaluate(member_model, X):
        cols = term_matrix(member_model, X)
        out = np.empty((len(grid), X.shape[0]))
        for i, budget in enumerate(grid):
            snap = snapshot_for_budget(member_model, budget)
            out[i] = predict_snapshot(member_model, None, snap, cols)
        return out

    if variant == "plain":
        Xtr, _ = design_matrix(train)
        Xte, _ = design_matrix(test)
        model = mars_fit_matrix(Xtr, train.target, params, vseed.key(SALT_LEARNER))
        traj_tr = evaluate(model, Xtr)
        traj_te = evaluate(model, Xte)
        return [(traj_tr[i], traj_te[i], train.target) for i in range(len(grid))]
    if variant == "bp":
        espec = make_recipe(
            "marsquake",
            max_terms=grid[-1],
            restart_floor=None,
            b_members=b_members,
            seed=vseed,
        )
        model = ensemble_fit(train, espec, threads=threads)
        mean_tr, mean_te = _member_trajectories(model, train, test, grid, evaluate)
        return [(mean_tr[i], mean_te[i], train.target) for i in range(len(grid))]
    espec = EnsembleSpec(
        base="mars",
        base_params=params,
        resample=_population_plan(b_members),
        perturb=PerturbConfig(),
        augment=AugmentConfig(),
        seed=vseed,
    )
    model = ensemble_fit(pool, espec, threads=threads)
    mean_tr, mean_te = _member_trajectories(model, pool, test, grid, evaluate)
    return [(mean_tr[i], mean_te[i], pool.target) for i in range(len(grid))]


_FAMILY_CELLS = {"tree": _tree_cells, "boosting": _boost_cells, "mars": _mars_cells}


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Fit every (variant, depth, replication) cell and score it three ways.

    Each replication draws fresh train and test samples; the population
    variant additionally draws a pool of b_members * n rows and hands each
    member one disjoint block of it.  Within a replication all depths of a
    variant share the same seed, so the depth axis is walked with common
    random numbers.  Scores: fit to the test panel's stored conditional
    mean, to the training target, and to the noisy test target.
    """
    grid = spec.depth_grid
    cells_fn = _FAMILY_CELLS[spec.family]
    need_pool = "population" in spec.variants
    records: list[SweepRecord] = []
    for rep in range(spec.replications):
        data_seed = SeedSpec(spec.seed.key(SALT_REP, rep), 0)
        train, test = generate(replace(spec.dgp, seed=data_seed))
        pool_data = None
        if need_pool:
            pool_seed = SeedSpec(spec.seed.key(SALT_REP, rep, SALT_DATA_POOL), 0)
            pool_spec = replace(
                spec.dgp, n=spec.dgp.n * spec.b_members, seed=pool_seed, n_test=1
            )
            pool_data = generate(pool_spec)[0].data
        f_test = test.f
        for variant in spec.variants:
            vindex = VARIANT_NAMES.index(variant)
            vseed = SeedSpec(spec.seed.key(SALT_REP, rep, SALT_VARIANT, vindex), 0)
            try:
                cells = cells_fn(
                    variant,
                    grid,
                    train.data,
                    test.data,
                    pool_data,
                    spec.b_members,
                    vseed,
                    threads,
                )
            except (ConfigError, LearnerError) as exc:
                raise LearnerError(
                    f"sweep cell failed (variant={variant!r}, depths={grid}, "
                    f"rep={rep}): {exc}"
                ) from exc
            for depth, (pred_tr, pred_te, target_tr) in zip(grid, cells):
                records.append(
                    SweepRecord(
                        variant=variant,
                        depth=depth,
                        rep=rep,
                        r2_true_test=r2_score(f_test, pred_te),
                        r2_train=r2_score(target_tr, pred_tr),
                        r2_test=r2_score(test.data.target, pred_te),
                    )
                )
    order = {v: i for i, v in enumerate(spec.variants)}
    depth_order = {d: i for i, d in enumerate(grid)}
    records.sort(key=lambda r: (order[r.variant], depth_order[r.depth], r.rep))
    return SweepResult(spec=spec, records=tuple(records))


# ---------------------------------------------------------------------------
# paired significance tests


@dataclass(frozen=True)
class TestReport:
    """Paired loss-differential test: mean difference, statistic, p, stars."""

    kind: str
    n: int
    mean_diff: float
    statistic: float
    p_value: float
    stars: str
    degenerate: bool = False


def significance_stars(p_value: float) -> str:
    """'*', '**', '***' at the 5, 1, and 0.1 percent levels."""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def compare(err_a, err_b, kind: str = "t", lag: int = 0) -> TestReport:
    """Two-sided paired test on the loss differential err_a - err_b.

    ``t`` is the paired t-test with n-1 degrees of freedom.  ``dm`` divides
    the same mean by a Newey-West long-run variance with ``lag`` Bartlett
    weights and reads the statistic against a standard normal, which is the
    serial-correlation-robust version appropriate for forecast-error series;
    with ``lag=0`` the two differ only by the variance scaling.  A
    differential with zero variance is reported as degenerate with p = 1.
    """
    a = np.asarray(err_a, dtype=np.float64)
    b = np.asarray(err_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ConfigError("loss vectors must be one-dimensional and equally long")
    n = a.size
    if n < 5:
        raise ConfigError(f"need at least 5 paired losses, got {n}")
    if kind not in ("t", "dm"):
        raise ConfigError(f"kind must be 't' or 'dm', got {kind!r}")
    if lag < 0 or lag >= n:
        raise ConfigError(f"lag must be in [0, {n - 1}], got {lag}")
    d = a - b
    mean = float(d.mean())
    centered = d - mean
    if kind == "t":
        sd = float(d.std(ddof=1))
        if sd == 0.0:
            return TestReport(kind, n, mean, 0.0, 1.0, "", degenerate=True)
        statistic = mean / (sd / math.sqrt(n))
        p = 2.0 * float(_scipy_stats.t.sf(abs(statistic), n - 1))
    else:
        gamma0 = float(centered @ centered) / n
        lrv = gamma0
        for ell in range(1, lag + 1):
            cov = float(centered[ell:] @ centered[:-ell]) / n
            lrv += 2.0 * (1.0 - ell / (lag + 1.0)) * cov
        if lrv <= 0.0:
            return TestReport(kind, n, mean, 0.0, 1.0, "", degenerate=True)
        statistic = mean / math.sqrt(lrv / n)
        p = 2.0 * float(_scipy_stats.norm.sf(abs(statistic)))
    return TestReport(kind, n, mean, statistic, p, significance_stars(p))


# ---------------------------------------------------------------------------
# averaged-predictor desk (greedy univariate LS vs OLS under junk features)


@dataclass(frozen=True)
class Fig2Point:
    """Log MSE ratios against the clean-design OLS oracle at one junk count."""

    n_useless: int
    log_ratio_greedy: float
    log_ratio_ols: float
    mse_greedy: float
    mse_ols: float
    mse_oracle: float


_FIG2_TRUE_K = 10


def run_fig2(
    seed: SeedSpec = SeedSpec(0, 0),
    grid: Sequence[int] = (0, 30, 60, 90, 120),
    n_models: int = 50,
    n_bags: int = 20,
    n: int = 100,
    n_test: int = 1000,
    snr: float = 2.0,
    steps: int = 100,
    replications: int = 1,
) -> list[Fig2Point]:
    """Averaged linear predictors under growing junk-feature contamination.

    The target is the sum of ten standard-normal regressors plus noise at
    the given signal-to-noise ratio.  At each grid count x, every one of the
    ``n_models`` draws receives its own fresh x junk columns (train and
    test); greedy univariate LS is additionally averaged over ``n_bags``
    bootstrap bags per draw, while OLS is fit once per draw on the full
    sample.  The oracle is OLS on the ten clean columns only.  With x near
    n the OLS design turns square and interpolates, exploding its test MSE;
    the greedy curve stays nearly flat.
    """
    grid = [int(x) for x in grid]
    if any(x < 0 for x in grid) or not grid:
        raise ConfigError(f"junk-feature grid must be nonempty and >= 0, got {grid}")
    if min(n_models, n_bags, n, n_test, replications) < 1:
        raise ConfigError("n_models, n_bags, n, n_test, replications must be >= 1")
    if snr <= 0.0:
        raise ConfigError(f"snr must be positive, got {snr}")
    sigma = math.sqrt(_FIG2_TRUE_K / snr)
    sums = {x: np.zeros(5) for x in grid}
    for rep in range(replications):
        base = rng_from_key(seed.key(SALT_FIG2, rep))
        Xtr = base.standard_normal((n, _FIG2_TRUE_K))
        ytr = Xtr.sum(axis=1) + sigma * base.standard_normal(n)
        Xte = base.standard_normal((n_test, _FIG2_TRUE_K))
        yte = Xte.sum(axis=1) + sigma * base.standard_normal(n_test)
        oracle = ols_fit(Dataset.from_arrays(Xtr, ytr))
        mse_oracle = float(np.mean((yte - linear_predict(oracle, Xte)) ** 2))
        bag_plan = ResamplePlan(kind="bootstrap", rate=1.0, b_members=n_bags)
        for x in grid:
            greedy_tot = np.zeros(n_test)
            ols_tot = np.zeros(n_test)
            for m in range(n_models):
                mrng = rng_from_key(seed.key(SALT_FIG2, rep, x, m))
                Dtr = np.hstack([Xtr, mrng.standard_normal((n, x))])
                Dte = np.hstack([Xte, mrng.standard_normal((n_test, x))])
                bag_seed = SeedSpec(seed.key(SALT_FIG2, rep, x, m), 0)
                for j in range(n_bags):
                    rows = draw_indices(bag_plan, j, n, bag_seed)
                    model = greedy_ls_fit(
                        Dataset.from_arrays(Dtr[rows], ytr[rows]), steps=steps
                    )
                    greedy_tot += linear_predict(model, Dte)
                full = ols_fit(Dataset.from_arrays(Dtr, ytr))
                ols_tot += linear_predict(full, Dte)
            mse_greedy = float(
                np.mean((yte - greedy_tot / (n_models * n_bags)) ** 2)
            )
            mse_ols = float(np.mean((yte - ols_tot / n_models) ** 2))
            sums[x] += np.array(
                [
                    math.log(mse_greedy / mse_oracle),
                    math.log(mse_ols / mse_oracle),
                    mse_greedy,
                    mse_ols,
                    mse_oracle,
                ]
            )
    points = []
    for x in grid:
        lg, lo, mg, mo, mor = sums[x] / replications
        points.append(Fig2Point(x, float(lg), float(lo), float(mg), float(mo), float(mor)))
    return points


def write_fig2_csv(points: Sequence[Fig2Point], path) -> None:
    lines = ["n_useless,log_ratio_greedy,log_ratio_ols,mse_greedy,mse_ols,mse_oracle"]
    for p in points:
        lines.append(
            f"{p.n_useless},{_fmt(p.log_ratio_greedy)},{_fmt(p.log_ratio_ols)},"
            f"{_fmt(p.mse_greedy)},{_fmt(p.mse_ols)},{_fmt(p.mse_oracle)}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# benchmark table


BENCH_MODELS = (
    "rf",
    "tree_pruned",
    "boost_tuned",
    "boost_plain",
    "boost_bp",
    "booging",
    "mars_tuned",
    "mars_plain",
    "mars_bp",
    "marsquake",
)

#: Which tuned row each model's significance test runs against.
_BENCH_REFERENCE = {
    "rf": "tree_pruned",
    "boost_plain": "boost_tuned",
    "boost_bp": "boost_tuned",
    "booging": "boost_tuned",
    "mars_plain": "mars_tuned",
    "mars_bp": "mars_tuned",
    "marsquake": "mars_tuned",
}


@dataclass(frozen=True)
class BenchRow:
    model: str
    r2_train: float
    r2_test: float
    statistic: float
    p_value: float
    stars: str


def _cv_folds(n: int, folds: int, seed: SeedSpec) -> list[np.ndarray]:
    perm = seed.rng(SALT_PRUNE_CV).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _tune_boost(Xtr, ytr, grid, folds, mseed):
    """5-fold CV over the step ladder; one full-depth fit serves every cell."""
    params = BoostParams(
        steps=grid[-1], learning_rate=0.1, subsample=0.5, interaction_depth=3
    )
    parts = _cv_folds(Xtr.shape[0], folds, mseed)
    cv_sse = np.zeros(len(grid))
    for f, hold in enumerate(parts):
        keep = np.sort(np.concatenate([p for g, p in enumerate(parts) if g != f]))
        fold_model = boost_fit_matrix(
            Xtr[keep], ytr[keep], params, mseed.key(SALT_PRUNE_FOLD, f)
        )
        traj = boost_trajectory(fold_model, Xtr[hold], list(grid))
        cv_sse += np.sum((traj - ytr[hold]) ** 2, axis=1)
    best = grid[int(np.argmin(cv_sse))]
    full = boost_fit_matrix(Xtr, ytr, params, mseed.key(SALT_LEARNER))
    return full, best


def _tune_mars(Xtr, ytr, grid, folds, mseed):
    """5-fold CV over the term-budget ladder via forward-pass snapshots."""
    params = MarsParams(max_terms=grid[-1], max_degree=3)
    parts = _cv_folds(Xtr.shape[0], folds, mseed)
    cv_sse = np.zeros(len(grid))
    for f, hold in enumerate(parts):
        keep = np.sort(np.concatenate([p for g, p in enumerate(parts) if g != f]))
        fold_model = mars_fit_matrix(
            Xtr[keep], ytr[keep], params, mseed.key(SALT_PRUNE_FOLD, f)
        )
        cols = term_matrix(fold_model, Xtr[hold])
        for i, budget in enumerate(grid):
            snap = snapshot_for_budget(fold_model, budget)
            pred = predict_snapshot(fold_model, None, snap, cols)
            cv_sse[i] += float(np.sum((pred - ytr[hold]) ** 2))
    best = grid[int(np.argmin(cv_sse))]
    full = mars_fit_matrix(Xtr, ytr, params, mseed.key(SALT_LEARNER))
    return full, best


_BENCH_RECIPE = {
    "rf": "rf",
    "boost_bp": "bp_boost",
    "booging": "booging",
    "mars_bp": "bp_mars",
    "marsquake": "marsquake",
}


def run_bench(
    train: Dataset,
    test: Dataset,
    models: Sequence[str] = BENCH_MODELS,
    b_members: int = 100,
    folds: int = 5,
    boost_grid: Sequence[int] | None = None,
    mars_grid: Sequence[int] | None = None,
    seed: SeedSpec = SeedSpec(0, 0),
    test_kind: str = "t",
    lag: int = 0,
    threads: int = 1,
    recipe_overrides: dict[str, dict] | None = None,
) -> list[BenchRow]:
    """Train/test scores for a panel of models plus significance vs tuned.

    Tuned boosting and hinge regression pick their depth by K-fold CV over
    the sweep ladders; the plain rows run at the maximal ladder depth; the
    bagged rows use the named recipes; the pruned tree uses cost-complexity
    pruning with its own 10-fold CV.  ``recipe_overrides`` maps a recipe-based
    row name to extra recipe overrides (e.g. a smaller member term budget for
    a scaled-down run).  Every model's test predictions pass through the
    outlier filter with the bagged-tree predictions as the replacement value,
    and each non-tuned row reports a paired test on squared errors against
    its family's tuned row.
    """
    models = list(models)
    if not models:
        raise ConfigError("model list must be nonempty")
    for name in models:
        if name not in BENCH_MODELS:
            raise ConfigError(
                f"unknown bench model {name!r}; expected one of {BENCH_MODELS}"
            )
    if len(set(models)) != len(models):
        raise ConfigError(f"duplicate bench models in {models}")
    if folds < 2:
        raise ConfigError(f"folds must be >= 2, got {folds}")
    recipe_overrides = dict(recipe_overrides or {})
    for name in recipe_overrides:
        if name not in _BENCH_RECIPE:
            raise ConfigError(
                f"recipe_overrides key {name!r} is not a recipe-based bench model; "
                f"expected one of {tuple(_BENCH_RECIPE)}"
            )
    bgrid = _validate_grid("boosting", boost_grid or BOOST_DEPTH_GRID)
    mgrid = _validate_grid("mars", mars_grid or MARS_DEPTH_GRID)
    Xtr, _ = design_matrix(train)
    Xte, _ = design_matrix(test)
    ytr, yte = train.target, test.target

    def model_seed(name: str) -> SeedSpec:
        return SeedSpec(seed.key(SALT_BENCH, BENCH_MODELS.index(name)), 0)

    fit_list = list(models)
    if "rf" not in fit_list:
        fit_list.insert(0, "rf")  # always fitted: it supplies the fallback
    preds_tr: dict[str, np.ndarray] = {}
    preds_te: dict[str, np.ndarray] = {}
    def fit_recipe(name: str, mseed: SeedSpec):
        overrides = dict(recipe_overrides.get(name, {}))
        overrides.update(b_members=b_members, seed=mseed)
        ens = ensemble_fit(
            train, make_recipe(_BENCH_RECIPE[name], **overrides), threads=threads
        )
        return ens.train_fitted, ensemble_predict(ens, test)

    for name in fit_list:
        mseed = model_seed(name)
        if name in _BENCH_RECIPE:
            preds_tr[name], preds_te[name] = fit_recipe(name, mseed)
        elif name == "tree_pruned":
            full = grow(train, TreeParams(min_node=1, mtry=1.0), mseed)
            pruned = cost_complexity_prune(full, train, folds=10, seed=mseed)
            preds_tr[name] = tree_predict(pruned, Xtr)
            preds_te[name] = tree_predict(pruned, Xte)
        elif name == "boost_tuned":
            full, best = _tune_boost(Xtr, ytr, bgrid, folds, mseed)
            preds_tr[name] = boost_predict(full, Xtr, n_stages=best)
            preds_te[name] = boost_predict(full, Xte, n_stages=best)
        elif name == "boost_plain":
            params = BoostParams(
                steps=bgrid[-1], learning_rate=0.1, subsample=0.5, interaction_depth=3
            )
            full = boost_fit_matrix(Xtr, ytr, params, mseed.key(SALT_LEARNER))
            preds_tr[name] = boost_predict(full, Xtr)
            preds_te[name] = boost_predict(full, Xte)
        elif name == "mars_tuned":
            full, best = _tune_mars(Xtr, ytr, mgrid, folds, mseed)
            snap = snapshot_for_budget(full, best)
            preds_tr[name] = predict_snapshot(full, Xtr, snap)
            preds_te[name] = predict_snapshot(full, Xte, snap)
        else:  # mars_plain
            params = MarsParams(max_terms=mgrid[-1], max_degree=3)
            full = mars_fit_matrix(Xtr, ytr, params, mseed.key(SALT_LEARNER))
            preds_tr[name] = mars_predict(full, Xtr)
            preds_te[name] = mars_predict(full, Xte)

    fallback = preds_te["rf"]
    filtered = {
        name: outlier_filter(preds_te[name], ytr, fallback) for name in models
    }
    rows = []
    for name in models:
        ref = _BENCH_REFERENCE.get(name)
        if ref is not None and ref in filtered:
            report = compare(
                (yte - filtered[name]) ** 2,
                (yte - filtered[ref]) ** 2,
                kind=test_kind,
                lag=lag,
            )
            stat, p, stars = report.statistic, report.p_value, report.stars
        else:
            stat, p, stars = float("nan"), float("nan"), ""
        rows.append(
            BenchRow(
                model=name,
                r2_train=r2_score(ytr, preds_tr[name]),
                r2_test=r2_score(yte, filtered[name]),
                statistic=stat,
                p_value=p,
                stars=stars,
            )
        )
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path) -> None:
    lines = ["model,r2_train,r2_test,statistic,p_value,stars"]
    for r in rows:
        lines.append(
            f"{r.model},{_fmt(r.r2_train)},{_fmt(r.r2_test)},"
            f"{_fmt(r.statistic)},{_fmt(r.p_value)},{r.stars}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
