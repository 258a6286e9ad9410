"""MARS forward pass: greedy hinge-pair expansion with joint OLS refits.

Terms are products of hinge factors max(0, +/-(x_k - t)).  Each step adds
the reflected pair (parent x both hinge signs at the best knot of the best
eligible feature) that most reduces training SSE, refitting every
coefficient by least squares.  There is no backward pass; overfit control
is deliberately left to the ensemble layer.  An optional restart refits a
second forward pass on the residuals when the first stalls at a low
training R-squared.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from . import _kernels
from .data import Dataset, design_matrix
from .errors import ConfigError, DataError
from .randomization import (
    SALT_LEARNER,
    SALT_MARS_RESTART,
    SALT_MARS_STEPS,
    SeedSpec,
    choose_features,
    mix64,
    rng_from_key,
)

# A raw column whose component orthogonal to the current basis is below
# this fraction of its own norm is treated as linearly dependent and
# dropped.  The scan kernel only scores directions whose orthogonal part
# is at least 1e-5 of the column scale (1e-10 on squared norms), so a
# direction the search selected is never itself dropped here.
_DROP_TOL = 1e-10
_SCAN_TOL = 1e-10  # squared-norm usability threshold inside the knot scan


@dataclasses.dataclass(frozen=True)
class MarsParams:
    max_terms: int = 200
    max_degree: int = 3
    mtry: float = 1.0
    tol: float = 0.0
    restart_floor: float | None = None

    def __post_init__(self) -> None:
        if self.max_terms < 1:
            raise ConfigError(f"max_terms must be >= 1, got {self.max_terms}")
        if self.max_degree < 1:
            raise ConfigError(f"max_degree must be >= 1, got {self.max_degree}")
        if not 0.0 < self.mtry <= 1.0:
            raise ConfigError(f"mtry must be in (0, 1], got {self.mtry}")
        if self.tol < 0.0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")
        if self.restart_floor is not None and not 0.0 <= self.restart_floor < 1.0:
            raise ConfigError(f"restart_floor must be in [0, 1), got {self.restart_floor}")


@dataclasses.dataclass(frozen=True)
class HingeTerm:
    """Product of hinge factors (feature, knot, direction in {+1, -1})."""

    factors: tuple[tuple[int, float, int], ...]

    @property
    def degree(self) -> int:
        return len(self.factors)

    def features(self) -> set[int]:
        return {f for f, _, _ in self.factors}


@dataclasses.dataclass(frozen=True)
class MarsSnapshot:
    """Joint-OLS state after one forward step: term count + coefficients."""

    n_terms: int
    intercept: float
    coefs: np.ndarray


@dataclasses.dataclass
class MarsModel:
    intercept: float
    terms: list[HingeTerm]
    coefs: np.ndarray
    params: MarsParams
    n_features: int
    snapshots: list[MarsSnapshot]
    sse0: float
    sse_final: float

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def train_r2(self) -> float:
        if self.sse0 <= 0.0:
            return 1.0
        return 1.0 - self.sse_final / self.sse0


def _term_column(term: HingeTerm, X: np.ndarray) -> np.ndarray:
    col = np.ones(X.shape[0])
    for f, t, d in term.factors:
        col = col * np.maximum(d * (X[:, f] - t), 0.0)
    return col


def term_matrix(model: MarsModel, X: np.ndarray) -> np.ndarray:
    """(n_terms, n_rows) raw basis values — shared by trajectory evaluation."""
    out = np.empty((model.n_terms, X.shape[0]))
    for j, term in enumerate(model.terms):
        out[j] = _term_column(term, X)
    return out


def _forward_matrix(X: np.ndarray, y: np.ndarray, params: MarsParams, base_key: int) -> MarsModel:
    Xc = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    yv = np.asarray(y, dtype=np.float64)
    n, k = Xc.shape
    if n == 0:
        raise DataError("cannot fit on an empty dataset")
    cap = params.max_terms + 1
    Braw = np.zeros((cap, n))
    Braw[0] = 1.0
    Qt = np.zeros((n, cap))
    R = np.zeros((cap, cap))
    qty = np.zeros(cap)

    rootn = float(np.sqrt(n))
    Qt[:, 0] = 1.0 / rootn
    R[0, 0] = rootn
    qty[0] = float(Qt[:, 0] @ yv)
    r = yv - qty[0] * Qt[:, 0]
    sse0 = float(r @ r)
    sse_cur = sse0
    q_used = 1

    orders = [np.argsort(Xc[:, f], kind="stable").astype(np.int64) for f in range(k)]
    xcols = [np.ascontiguousarray(Xc[:, f]) for f in range(k)]
    terms: list[HingeTerm] = []
    snapshots: list[MarsSnapshot] = []

    def snap() -> None:
        beta = scipy.linalg.solve_triangular(
            R[:q_used, :q_used], qty[:q_used], lower=False
        )
        snapshots.append(
            MarsSnapshot(
                n_terms=len(terms), intercept=float(beta[0]), coefs=beta[1:].copy()
            )
        )

    snap()
    stop_floor = max(params.tol * sse0, 1e-13 * sse0)
    rng = None
    while len(terms) + 2 <= params.max_terms and sse_cur > 1e-12 * sse0:
        if params.mtry < 1.0:
            if rng is None:
                rng = rng_from_key(mix64(base_key, SALT_MARS_STEPS))
            feats = choose_features(k, params.mtry, rng)
        else:
            feats = np.arange(k, dtype=np.int64)
        parents = [
            p
            for p in range(len(terms) + 1)
            if (0 if p == 0 else terms[p - 1].degree) < params.max_degree
        ]
        best_red = 0.0
        best = None  # (feature, parent id, knot)
        for f in feats:
            par_ids = np.asarray(
                [p for p in parents if p == 0 or f not in terms[p - 1].features()],
                dtype=np.int64,
            )
            if par_ids.size == 0:
                continue
            red, pp, knot = _kernels.mars_scan_feature(
                xcols[f], orders[f], Braw, par_ids, Qt, q_used, r, _SCAN_TOL
            )
            if pp >= 0 and red > best_red:
                best_red = red
                best = (int(f), int(par_ids[pp]), float(knot))
        if best is None or best_red <= stop_floor:
            break
        f, pid, knot = best
        z = Braw[pid]
        parent_factors = () if pid == 0 else terms[pid - 1].factors
        added = 0
        for direction in (1, -1):
            col = z * np.maximum(direction * (xcols[f] - knot), 0.0)
            raw_norm = float(np.sqrt(col @ col))
            w = col.copy()
            rcol = np.zeros(q_used)
            for _ in range(2):  # re-orthogonalize for stability
                proj = Qt[:, :q_used].T @ w
                w -= Qt[:, :q_used] @ proj
                rcol += proj
            wn = float(np.sqrt(w @ w))
            if raw_norm == 0.0 or wn <= _DROP_TOL * raw_norm:
                continue  # linearly dependent column: dropped
            Braw[q_used] = col
            Qt[:, q_used] = w / wn
            R[:q_used, q_used] = rcol
            R[q_used, q_used] = wn
            c = float(Qt[:, q_used] @ r)
            qty[q_used] = c
            r = r - c * Qt[:, q_used]
            sse_cur = max(sse_cur - c * c, 0.0)
            terms.append(HingeTerm(parent_factors + ((f, knot, direction),)))
            q_used += 1
            added += 1
        if added == 0:
            break
        snap()

    last = snapshots[-1]
    return MarsModel(
        intercept=last.intercept,
        terms=terms,
        coefs=last.coefs,
        params=params,
        n_features=k,
        snapshots=snapshots,
        sse0=sse0,
        sse_final=sse_cur,
    )


def mars_forward(train: Dataset, params: MarsParams, seed: SeedSpec) -> MarsModel:
    """Forward pass only; with mtry = 1 no randomness is consumed."""
    X, _ = design_matrix(train)
    return _forward_matrix(X, train.target, params, seed.key(SALT_LEARNER))


def mars_predict(model: MarsModel, X: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(X, Dataset):
        mat = design_matrix(X)[0]
    else:
        mat = np.asarray(X, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != model.n_features:
        raise DataError(
            f"feature matrix has {mat.shape[1] if mat.ndim == 2 else '?'} columns, "
            f"model was trained on {model.n_features}"
        )
    pred = np.full(mat.shape[0], model.intercept)
    for term, coef in zip(model.terms, model.coefs):
        pred += coef * _term_column(term, mat)
    return pred


def snapshot_for_budget(model: MarsModel, max_terms: int) -> int:
    """Index of the snapshot a fit with this term budget would have ended on.

    Step j executes only while (terms before the step) + 2 <= max_terms, and
    step selection never looks at the budget, so the forward pass truncated
    this way is bit-identical to a fresh fit with the smaller max_terms.
    """
    idx = 0
    for j in range(1, len(model.snapshots)):
        if model.snapshots[j - 1].n_terms + 2 <= max_terms:
            idx = j
        else:
            break
    return idx


def predict_snapshot(
    model: MarsModel,
    X: np.ndarray | None,
    snap_index: int,
    term_cols: np.ndarray | None = None,
) -> np.ndarray:
    """Prediction of the model as it stood at a stored forward step."""
    if term_cols is None:
        if X is None:
            raise ConfigError("predict_snapshot needs X or precomputed term_cols")
        term_cols = term_matrix(model, np.asarray(X, dtype=np.float64))
    s = model.snapshots[snap_index]
    pred = np.full(term_cols.shape[1] if s.n_terms == 0 else term_cols.shape[1], s.intercept)
    if s.n_terms:
        pred = pred + s.coefs @ term_cols[: s.n_terms]
    return pred


def _combine(first: MarsModel, second: MarsModel, params: MarsParams, sse0: float, sse_final: float) -> MarsModel:
    return MarsModel(
        intercept=first.intercept + second.intercept,
        terms=first.terms + second.terms,
        coefs=np.concatenate((first.coefs, second.coefs)),
        params=params,
        n_features=first.n_features,
        snapshots=[],
        sse0=sse0,
        sse_final=sse_final,
    )


def _restart_matrix(
    X: np.ndarray, y: np.ndarray, params: MarsParams, r2_floor: float, base_key: int
) -> MarsModel:
    first = _forward_matrix(X, y, params, base_key)
    if first.train_r2 >= r2_floor:
        return first
    resid = np.asarray(y, dtype=np.float64) - mars_predict(first, X)
    second = _forward_matrix(X, resid, params, mix64(base_key, SALT_MARS_RESTART))
    return _combine(first, second, params, first.sse0, second.sse_final)


def mars_restart(
    train: Dataset, params: MarsParams, r2_floor: float, seed: SeedSpec
) -> MarsModel:
    """One forward pass, plus a second on residuals when R2 ends under the floor.

    The combined model adds intercepts and concatenates term lists; at most
    one restart ever runs.
    """
    if not 0.0 <= r2_floor < 1.0:
        raise ConfigError(f"r2_floor must be in [0, 1), got {r2_floor}")
    X, _ = design_matrix(train)
    return _restart_matrix(X, train.target, params, r2_floor, seed.key(SALT_LEARNER))


def mars_fit_matrix(X: np.ndarray, y: np.ndarray, params: MarsParams, base_key: int) -> MarsModel:
    """Matrix-level entry used by the ensemble layer: honors restart_floor."""
    if params.restart_floor is None:
        return _forward_matrix(X, y, params, base_key)
    return _restart_matrix(X, y, params, params.restart_floor, base_key)
