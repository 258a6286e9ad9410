"""Bagged, perturbed, and augmented ensembles around any base learner.

One wrapper provides the three ingredients that turn a greedy fitter into a
self-regularizing model: row resampling (bagging / subsampling / disjoint
population blocks), fit randomization (feature subsets per split or step,
stage subsampling, whole-feature drops per member), and data augmentation
(noisy or shuffled replica columns appended to the features).  Composing
them over the tree, boosting, and hinge-regression bases yields random
forests and their boosted/spline analogues from a single code path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .boosting import BoostParams, boost_fit_matrix, boost_predict
from .data import CATEGORICAL, Dataset, design_matrix
from .errors import ConfigError, DataError, LearnerError
from .linear import (
    GreedyLsParams,
    greedy_ls_fit,
    linear_predict,
    ols_fit,
)
from .mars import MarsParams, mars_fit_matrix, mars_predict
from .randomization import (
    SALT_AUGMENT,
    SALT_DROP,
    SALT_LEARNER,
    SALT_MEMBER,
    ResamplePlan,
    SeedSpec,
    draw_indices,
    mix64,
    rng_from_key,
)
from .tree import TreeParams, grow_matrix, predict as tree_predict

__all__ = [
    "BASE_KINDS",
    "RECIPE_NAMES",
    "PerturbConfig",
    "AugmentConfig",
    "EnsembleSpec",
    "EnsembleModel",
    "ensemble_fit",
    "ensemble_predict",
    "make_recipe",
]

BASE_KINDS = ("tree", "boosting", "mars", "greedy_ls", "ols")
RECIPE_NAMES = ("rf", "bp_boost", "booging", "bp_mars", "marsquake")

_PARAM_TYPES = {
    "tree": TreeParams,
    "boosting": BoostParams,
    "mars": MarsParams,
    "greedy_ls": GreedyLsParams,
    "ols": type(None),
}


@dataclass(frozen=True)
class PerturbConfig:
    """Fit-level randomization applied inside each member.

    ``mtry`` < 1 randomizes the candidate features of every tree split and
    every hinge-regression step; ``stage_subsample``, when set, overrides the
    boosting base's per-stage row fraction; ``feature_drop`` removes that
    fraction of the (post-augmentation) columns from the member's view.
    """

    mtry: float = 1.0
    feature_drop: float = 0.0
    stage_subsample: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.mtry <= 1.0:
            raise ConfigError(f"mtry must be in (0, 1], got {self.mtry}")
        if not 0.0 <= self.feature_drop < 1.0:
            raise ConfigError(
                f"feature_drop must be in [0, 1), got {self.feature_drop}"
            )
        if self.stage_subsample is not None and not 0.0 < self.stage_subsample <= 1.0:
            raise ConfigError(
                f"stage_subsample must be in (0, 1], got {self.stage_subsample}"
            )


@dataclass(frozen=True)
class AugmentConfig:
    """Replica-column augmentation applied to each member's features.

    Every replica copies all columns, adding centered Gaussian noise to each
    numeric column (SD = ``noise_sd_fraction`` of that column's training SD)
    and re-shuffling ``shuffle_fraction`` of the rows of each categorical
    column.  Width grows from K to K * (1 + replicas).
    """

    enabled: bool = False
    replicas: int = 2
    noise_sd_fraction: float = 1.0 / 3.0
    shuffle_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.replicas < 1:
            raise ConfigError(f"replicas must be >= 1, got {self.replicas}")
        if self.noise_sd_fraction < 0.0:
            raise ConfigError(
                f"noise_sd_fraction must be >= 0, got {self.noise_sd_fraction}"
            )
        if not 0.0 <= self.shuffle_fraction <= 1.0:
            raise ConfigError(
                f"shuffle_fraction must be in [0, 1], got {self.shuffle_fraction}"
            )


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything that determines a fitted ensemble, given a dataset."""

    base: str
    base_params: TreeParams | BoostParams | MarsParams | GreedyLsParams | None
    resample: ResamplePlan
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0, 0))

    def __post_init__(self) -> None:
        if self.base not in BASE_KINDS:
            raise ConfigError(
                f"unknown base learner {self.base!r}; expected one of {BASE_KINDS}"
            )
        want = _PARAM_TYPES[self.base]
        if not isinstance(self.base_params, want):
            raise ConfigError(
                f"base {self.base!r} needs params of type {want.__name__}, "
                f"got {type(self.base_params).__name__}"
            )


@dataclass
class _Member:
    """One fitted member: its feature view plus the base model."""

    kept: np.ndarray | None  # post-augmentation column indices, None = all
    model: object


@dataclass
class EnsembleModel:
    spec: EnsembleSpec
    names: list[str]
    kinds: list[str]
    cat_counts: list[int]
    categories: dict[int, list[str]]
    train_sds: np.ndarray
    members: list[_Member]
    train_fitted: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.names)


def _augment_features(
    features: np.ndarray,
    kinds: list[str],
    train_sds: np.ndarray,
    cfg: AugmentConfig,
    noise_key: int,
) -> np.ndarray:
    """Append replica columns to a feature block, deterministically by key.

    Numeric replicas add noise scaled by the TRAINING column SDs (passed in,
    never recomputed), so fresh rows are augmented on the same scale the
    members were fitted with; running this on the training block itself
    reproduces the fitted views bit for bit.
    """
    n, k = features.shape
    out = np.empty((n, k * (1 + cfg.replicas)))
    out[:, :k] = features
    for rep in range(cfg.replicas):
        for j in range(k):
            col = features[:, j]
            rng = rng_from_key(mix64(noise_key, rep, j))
            if kinds[j] == CATEGORICAL:
                new = col.copy()
                m = int(round(cfg.shuffle_fraction * n))
                if m >= 2:
                    sel = rng.choice(n, size=m, replace=False)
                    new[sel] = new[sel[rng.permutation(m)]]
            else:
                sd = train_sds[j] * cfg.noise_sd_fraction
                new = col + sd * rng.standard_normal(n) if sd > 0.0 else col.copy()
            out[:, k * (1 + rep) + j] = new
    return out


def _augmented_schema(
    names: list[str],
    kinds: list[str],
    cat_counts: list[int],
    categories: dict[int, list[str]],
    replicas: int,
) -> tuple[list[str], list[str], list[int], dict[int, list[str]]]:
    k = len(names)
    out_names = list(names)
    out_kinds = list(kinds)
    out_counts = list(cat_counts)
    out_cats = dict(categories)
    for rep in range(replicas):
        for j in range(k):
            out_names.append(f"{names[j]}__rep{rep + 1}")
            out_kinds.append(kinds[j])
            out_counts.append(cat_counts[j])
            if j in categories:
                out_cats[k * (1 + rep) + j] = categories[j]
    return out_names, out_kinds, out_counts, out_cats


def _drop_columns(k_aug: int, drop_fraction: float, drop_key: int) -> np.ndarray | None:
    """Sorted kept-column indices after dropping round(drop*K) columns."""
    n_drop = int(np.floor(drop_fraction * k_aug + 0.5))
    n_drop = min(n_drop, k_aug - 1)
    if n_drop <= 0:
        return None
    rng = rng_from_key(drop_key)
    dropped = rng.choice(k_aug, size=n_drop, replace=False)
    keep = np.ones(k_aug, dtype=bool)
    keep[dropped] = False
    return np.flatnonzero(keep).astype(np.int64)


def _member_base_params(spec: EnsembleSpec):
    """Base params with the perturbation knobs folded in."""
    params = spec.base_params
    p = spec.perturb
    if spec.base in ("tree", "boosting", "mars") and p.mtry != 1.0:
        params = replace(params, mtry=p.mtry)
    if spec.base == "boosting" and p.stage_subsample is not None:
        params = replace(params, subsample=p.stage_subsample)
    return params


def _view_dataset(
    features: np.ndarray,
    target: np.ndarray,
    names: list[str],
    kinds: list[str],
    cat_counts: list[int],
    categories: dict[int, list[str]],
    kept: np.ndarray | None,
) -> Dataset:
    if kept is None:
        v_names, v_kinds, v_counts = names, kinds, cat_counts
        v_cats = categories
        mat = features
    else:
        mat = features[:, kept]
        v_names = [names[j] for j in kept]
        v_kinds = [kinds[j] for j in kept]
        v_counts = [cat_counts[j] for j in kept]
        v_cats = {
            pos: categories[int(j)]
            for pos, j in enumerate(kept)
            if int(j) in categories
        }
    return Dataset(mat, target, v_names, v_kinds, v_counts, categories=v_cats)


def _fit_base(base: str, params, view: Dataset, learner_key: int):
    if base == "greedy_ls":
        return greedy_ls_fit(view, params.steps, params.learning_rate)
    if base == "ols":
        return ols_fit(view)
    X, _ = design_matrix(view)
    if base == "tree":
        return grow_matrix(X, view.target, params, learner_key)
    if base == "boosting":
        return boost_fit_matrix(X, view.target, params, learner_key)
    return mars_fit_matrix(X, view.target, params, learner_key)


def _predict_base(base: str, model, view: Dataset) -> np.ndarray:
    if base in ("greedy_ls", "ols"):
        return linear_predict(model, view)
    X, _ = design_matrix(view)
    if base == "tree":
        return tree_predict(model, X)
    if base == "boosting":
        return boost_predict(model, X)
    return mars_predict(model, X)


def ensemble_fit(train: Dataset, spec: EnsembleSpec, threads: int = 1) -> EnsembleModel:
    """Fit all members and store their feature views.

    Population resampling treats ``train`` as a pooled source of exactly
    B * N rows, giving each member a disjoint block and no augmentation.
    Everything a member does is keyed by its index, so the result is
    identical for any ``threads`` value.
    """
    plan = spec.resample
    n_total = train.n_rows
    population = plan.kind == "population"
    if population:
        if n_total % plan.b_members != 0:
            raise ConfigError(
                f"population resampling needs a pooled source divisible by "
                f"B={plan.b_members}, got {n_total} rows"
            )
        n_member = n_total // plan.b_members
    else:
        n_member = n_total

    augment = spec.augment.enabled and not population
    base_params = _member_base_params(spec)
    train_sds = train.features.std(axis=0)
    if augment:
        a_names, a_kinds, a_counts, a_cats = _augmented_schema(
            train.names, train.kinds, train.cat_counts, train.categories,
            spec.augment.replicas,
        )
    else:
        a_names, a_kinds, a_counts, a_cats = (
            train.names, train.kinds, train.cat_counts, train.categories,
        )

    def fit_member(b: int) -> _Member:
        root = spec.seed.key(SALT_MEMBER, b)
        rows = draw_indices(plan, b, n_member, spec.seed)
        if augment:
            full = _augment_features(
                train.features, train.kinds, train_sds, spec.augment,
                mix64(root, SALT_AUGMENT),
            )
        else:
            full = train.features
        kept = _drop_columns(
            full.shape[1], spec.perturb.feature_drop, mix64(root, SALT_DROP)
        )
        view = _view_dataset(
            full[rows], train.target[rows], a_names, a_kinds, a_counts, a_cats, kept
        )
        model = _fit_base(spec.base, base_params, view, mix64(root, SALT_LEARNER))
        return _Member(kept=kept, model=model)

    members: list[_Member] = [None] * plan.b_members  # type: ignore[list-item]
    if threads > 1 and plan.b_members > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(fit_member, b): b for b in range(plan.b_members)}
            for fut, b in futures.items():
                try:
                    members[b] = fut.result()
                except (ConfigError, DataError) as exc:
                    raise LearnerError(f"member {b} failed: {exc}") from exc
    else:
        for b in range(plan.b_members):
            try:
                members[b] = fit_member(b)
            except (ConfigError, DataError) as exc:
                raise LearnerError(f"member {b} failed: {exc}") from exc

    model = EnsembleModel(
        spec=spec,
        names=list(train.names),
        kinds=list(train.kinds),
        cat_counts=list(train.cat_counts),
        categories=dict(train.categories),
        train_sds=train_sds,
        members=members,
        train_fitted=np.empty(0),
    )
    model.train_fitted = ensemble_predict(model, train.features)
    return model


def _query_features(model: EnsembleModel, X: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(X, Dataset):
        if X.n_cols != model.n_features or list(X.kinds) != list(model.kinds):
            raise DataError(
                "query schema does not match the ensemble's training schema"
            )
        return X.features
    mat = np.asarray(X, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != model.n_features:
        raise DataError(
            f"feature matrix has {mat.shape[1] if mat.ndim == 2 else '?'} columns, "
            f"model was trained on {model.n_features}"
        )
    return mat


def member_view(model: EnsembleModel, b: int, X: Dataset | np.ndarray) -> Dataset:
    """The feature view member ``b`` sees for the given query rows.

    Rebuilds replica columns from the member's stored keys and applies its
    kept-column selection.  Sweep drivers use this to evaluate one fitted
    member at many depth budgets without refitting; running the base
    predictor on this view is exactly what ``ensemble_predict`` averages.
    """
    spec = model.spec
    features = _query_features(model, X)
    member = model.members[b]
    augment = spec.augment.enabled and spec.resample.kind != "population"
    if augment:
        a_names, a_kinds, a_counts, a_cats = _augmented_schema(
            model.names, model.kinds, model.cat_counts, model.categories,
            spec.augment.replicas,
        )
        root = spec.seed.key(SALT_MEMBER, b)
        full = _augment_features(
            features, model.kinds, model.train_sds, spec.augment,
            mix64(root, SALT_AUGMENT),
        )
    else:
        a_names, a_kinds, a_counts, a_cats = (
            model.names, model.kinds, model.cat_counts, model.categories,
        )
        full = features
    dummy = np.zeros(features.shape[0])
    return _view_dataset(
        full, dummy, a_names, a_kinds, a_counts, a_cats, member.kept
    )


def ensemble_predict(model: EnsembleModel, X: Dataset | np.ndarray) -> np.ndarray:
    """Unweighted mean of member predictions on their own feature views.

    Members that were fitted on augmented columns have those columns rebuilt
    here with their stored keys and the training-column SDs; passing the
    training features back in therefore reproduces the fitted values exactly.
    """
    features = _query_features(model, X)
    total = np.zeros(features.shape[0])
    for b, member in enumerate(model.members):
        view = member_view(model, b, features)
        total += _predict_base(model.spec.base, member.model, view)
    return total / len(model.members)


def make_recipe(name: str, **overrides) -> EnsembleSpec:
    """Named ensemble configuration with optional field overrides.

    All recipes use 100 members on 2/3 row subsamples.  ``rf`` bags fully
    grown trees with per-split feature sampling; ``bp_boost`` / ``bp_mars``
    bag the randomized boosting and hinge-regression bases; ``booging`` and
    ``marsquake`` add replica-column augmentation and a 20% feature drop on
    top of those two.  Override keys: ``b_members``, ``rate``,
    ``resample_kind``, ``seed``, ``mtry``, ``feature_drop``,
    ``stage_subsample``, ``augment``, ``replicas``, ``noise_sd_fraction``,
    ``shuffle_fraction``, plus any field of the base params.
    """
    if name not in RECIPE_NAMES:
        raise ConfigError(
            f"unknown recipe {name!r}; expected one of {RECIPE_NAMES}"
        )
    plan = ResamplePlan(kind="subsample", rate=2.0 / 3.0, b_members=100)
    augment_on = AugmentConfig(enabled=True)
    if name == "rf":
        base, params = "tree", TreeParams(min_node=1)
        perturb = PerturbConfig(mtry=1.0 / 3.0)
        augment = AugmentConfig()
    elif name in ("bp_boost", "booging"):
        base, params = "boosting", BoostParams(
            steps=1000, learning_rate=0.1, subsample=0.5, interaction_depth=3
        )
        perturb = (
            PerturbConfig(feature_drop=0.2) if name == "booging" else PerturbConfig()
        )
        augment = augment_on if name == "booging" else AugmentConfig()
    else:  # bp_mars, marsquake
        base, params = "mars", MarsParams(max_terms=200, max_degree=3)
        if name == "marsquake":
            params = replace(params, restart_floor=0.9)
            perturb = PerturbConfig(mtry=0.5, feature_drop=0.2)
            augment = augment_on
        else:
            perturb = PerturbConfig(mtry=0.5)
            augment = AugmentConfig()

    seed = SeedSpec(0, 0)
    plan_kw: dict = {}
    param_fields = {f.name for f in fields(params)} if params is not None else set()
    for key, value in overrides.items():
        if key == "b_members":
            plan_kw["b_members"] = int(value)
        elif key == "rate":
            plan_kw["rate"] = float(value)
        elif key == "resample_kind":
            plan_kw["kind"] = str(value)
        elif key == "seed":
            seed = value
        elif key == "mtry":
            perturb = replace(perturb, mtry=float(value))
        elif key == "feature_drop":
            perturb = replace(perturb, feature_drop=float(value))
        elif key == "stage_subsample":
            perturb = replace(perturb, stage_subsample=float(value))
        elif key == "augment":
            augment = replace(augment, enabled=bool(value))
        elif key in ("replicas", "noise_sd_fraction", "shuffle_fraction"):
            augment = replace(augment, **{key: value})
        elif key in param_fields:
            params = replace(params, **{key: value})
        else:
            raise ConfigError(f"unknown recipe override {key!r}")
    if plan_kw:
        plan = replace(plan, **plan_kw)
    return EnsembleSpec(
        base=base,
        base_params=params,
        resample=plan,
        perturb=perturb,
        augment=augment,
        seed=seed,
    )
