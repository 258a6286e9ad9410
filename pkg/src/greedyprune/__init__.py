"""Randomized greedy ensembles that self-prune instead of early stopping.

Greedy base learners (CART trees, stochastic gradient boosting, forward
hinge regression, stagewise linear fits) are pushed to full overfit and
then stabilized by bagging, fit-path perturbation, and replica-column
augmentation.  Synthetic generators, depth-sweep/benchmark drivers, and a
CLI reproduce the supporting experiments.
"""

from .boosting import (
    BoostModel,
    BoostParams,
    boost_fit,
    boost_predict,
    boost_trajectory,
)
from .data import (
    Dataset,
    SplitPlan,
    design_matrix,
    load_csv,
    load_features_csv,
    outlier_filter,
    split,
    write_csv,
)
from .dgp import DGP_KINDS, DgpSpec, Sample, generate, snr_for_r2
from .ensemble import (
    BASE_KINDS,
    RECIPE_NAMES,
    AugmentConfig,
    EnsembleModel,
    EnsembleSpec,
    PerturbConfig,
    ensemble_fit,
    ensemble_predict,
    make_recipe,
    member_view,
)
from .errors import ConfigError, DataError, LearnerError
from .linear import (
    GreedyLsModel,
    GreedyLsParams,
    OlsModel,
    greedy_ls_fit,
    linear_predict,
    ols_fit,
)
from .mars import (
    HingeTerm,
    MarsModel,
    MarsParams,
    mars_forward,
    mars_predict,
    predict_snapshot,
    snapshot_for_budget,
)
from .model_io import load_model, model_from_json, model_to_json, save_model
from .randomization import ResamplePlan, SeedSpec, draw_indices, mix64, rng_from_key
from .simulation import (
    BENCH_MODELS,
    BOOST_DEPTH_GRID,
    MARS_DEPTH_GRID,
    SWEEP_FAMILIES,
    TREE_DEPTH_GRID,
    VARIANT_NAMES,
    BenchRow,
    Fig2Point,
    SweepRecord,
    SweepResult,
    SweepSpec,
    TestReport,
    compare,
    geometric_grid,
    log_range_grid,
    r2_score,
    run_bench,
    run_fig2,
    run_sweep,
    write_bench_csv,
    write_fig2_csv,
    write_sweep_csv,
    write_sweep_summary_csv,
)
from .tree import (
    Split,
    TreeModel,
    TreeParams,
    best_split,
    cost_complexity_prune,
    grow,
    predict,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "BASE_KINDS",
    "BENCH_MODELS",
    "BOOST_DEPTH_GRID",
    "BenchRow",
    "BoostModel",
    "BoostParams",
    "ConfigError",
    "DGP_KINDS",
    "DataError",
    "Dataset",
    "DgpSpec",
    "EnsembleModel",
    "EnsembleSpec",
    "Fig2Point",
    "GreedyLsModel",
    "GreedyLsParams",
    "HingeTerm",
    "LearnerError",
    "MARS_DEPTH_GRID",
    "MarsModel",
    "MarsParams",
    "OlsModel",
    "PerturbConfig",
    "RECIPE_NAMES",
    "ResamplePlan",
    "SWEEP_FAMILIES",
    "Sample",
    "SeedSpec",
    "Split",
    "SplitPlan",
    "SweepRecord",
    "SweepResult",
    "SweepSpec",
    "TREE_DEPTH_GRID",
    "TestReport",
    "TreeModel",
    "TreeParams",
    "VARIANT_NAMES",
    "best_split",
    "boost_fit",
    "boost_predict",
    "boost_trajectory",
    "compare",
    "cost_complexity_prune",
    "design_matrix",
    "draw_indices",
    "ensemble_fit",
    "ensemble_predict",
    "generate",
    "geometric_grid",
    "greedy_ls_fit",
    "grow",
    "linear_predict",
    "load_csv",
    "load_features_csv",
    "load_model",
    "log_range_grid",
    "make_recipe",
    "mars_forward",
    "mars_predict",
    "member_view",
    "mix64",
    "model_from_json",
    "model_to_json",
    "ols_fit",
    "outlier_filter",
    "predict",
    "predict_snapshot",
    "r2_score",
    "rng_from_key",
    "run_bench",
    "run_fig2",
    "run_sweep",
    "save_model",
    "snapshot_for_budget",
    "snr_for_r2",
    "split",
    "write_bench_csv",
    "write_csv",
    "write_fig2_csv",
    "write_sweep_csv",
    "write_sweep_summary_csv",
]
