"""Tabular data containers, CSV round-trips, splits, and prediction filtering.

A Dataset is an (n, k) float matrix plus a numeric target.  Categorical
columns are stored as integer codes (first-appearance order when loaded
from CSV) and one-hot expanded by `design_matrix` before any learner sees
them.  Missing values are rejected at construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .randomization import SALT_SPLIT, ceil_count, mix64, rng_from_key

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass
class Dataset:
    """Feature matrix, target vector, and per-column typing."""

    features: np.ndarray
    target: np.ndarray
    names: list[str]
    kinds: list[str]
    cat_counts: list[int]
    target_name: str = "y"
    # Original string labels per categorical column index; kept so CSVs
    # round-trip and models can re-encode fresh data consistently.
    categories: dict[int, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array")
        n, k = self.features.shape
        if n < 1 or k < 1:
            raise DataError(f"need at least one row and one column, got {n}x{k}")
        if self.target.shape != (n,):
            raise DataError("target length does not match feature rows")
        if not (len(self.names) == len(self.kinds) == len(self.cat_counts) == k):
            raise DataError("column metadata length does not match feature columns")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.target)):
            raise DataError("missing or non-finite values are not permitted")
        for j, kind in enumerate(self.kinds):
            if kind == NUMERIC:
                if self.cat_counts[j] != 0:
                    raise DataError(f"numeric column {self.names[j]!r} has a category count")
            elif kind == CATEGORICAL:
                col = self.features[:, j]
                cnt = self.cat_counts[j]
                if cnt < 1:
                    raise DataError(f"categorical column {self.names[j]!r} needs a positive count")
                if np.any(col != np.floor(col)) or col.min() < 0 or col.max() >= cnt:
                    raise DataError(
                        f"categorical column {self.names[j]!r} has codes outside 0..{cnt - 1}"
                    )
            else:
                raise DataError(f"unknown column kind {kind!r}")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_cols(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_arrays(cls, features, target, names=None, target_name="y") -> "Dataset":
        """All-numeric constructor for matrices built in code."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        k = features.shape[1]
        if names is None:
            names = [f"x{j + 1}" for j in range(k)]
        return cls(features, target, list(names), [NUMERIC] * k, [0] * k, target_name)

    def subset(self, rows: np.ndarray) -> "Dataset":
        """Row-subset copy; column metadata (including category vocab) is kept."""
        return replace(
            self,
            features=self.features[np.asarray(rows, dtype=np.int64)],
            target=self.target[np.asarray(rows, dtype=np.int64)],
        )


def design_matrix(data: Dataset) -> tuple[np.ndarray, list[str]]:
    """One-hot expand categoricals; numeric columns pass through untouched.

    A categorical with C levels becomes C indicator columns (no reference
    level is dropped; the learners here are unbothered by collinearity).
    """
    if all(kind == NUMERIC for kind in data.kinds):
        return data.features, list(data.names)
    cols: list[np.ndarray] = []
    names: list[str] = []
    for j, kind in enumerate(data.kinds):
        col = data.features[:, j]
        if kind == NUMERIC:
            cols.append(col)
            names.append(data.names[j])
        else:
            codes = col.astype(np.int64)
            for c in range(data.cat_counts[j]):
                cols.append((codes == c).astype(np.float64))
                names.append(f"{data.names[j]}={_level_label(data, j, c)}")
    return np.ascontiguousarray(np.column_stack(cols)), names


def _level_label(data: Dataset, j: int, code: int) -> str:
    vocab = data.categories.get(j)
    if vocab is not None and code < len(vocab):
        return vocab[code]
    return str(code)


def load_csv(path, target: str, categorical: tuple[str, ...] = ()) -> Dataset:
    """Read a headered CSV into a Dataset.

    Columns named in `categorical` are code-mapped in first-appearance
    order; everything else (including the target) must parse as float.
    """
    rows, header = _read_rows(path)
    if target not in header:
        raise DataError(f"target column {target!r} not found in {path}")
    for name in categorical:
        if name not in header:
            raise DataError(f"categorical column {name!r} not found in {path}")
        if name == target:
            raise DataError("the target cannot be categorical")
    t_idx = header.index(target)
    feat_names = [h for h in header if h != target]
    cat_set = set(categorical)
    kinds = [CATEGORICAL if h in cat_set else NUMERIC for h in feat_names]
    n, k = len(rows), len(feat_names)
    feats = np.empty((n, k), dtype=np.float64)
    targ = np.empty(n, dtype=np.float64)
    vocab: dict[int, list[str]] = {j: [] for j, kd in enumerate(kinds) if kd == CATEGORICAL}
    seen: dict[int, dict[str, int]] = {j: {} for j in vocab}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        targ[i] = _parse_float(row[t_idx], path, i, target)
        jj = 0
        for j, h in enumerate(header):
            if j == t_idx:
                continue
            if kinds[jj] == NUMERIC:
                feats[i, jj] = _parse_float(row[j], path, i, h)
            else:
                lut = seen[jj]
                code = lut.get(row[j])
                if code is None:
                    code = len(lut)
                    lut[row[j]] = code
                    vocab[jj].append(row[j])
                feats[i, jj] = float(code)
            jj += 1
    counts = [len(vocab[j]) if kinds[j] == CATEGORICAL else 0 for j in range(k)]
    return Dataset(feats, targ, feat_names, kinds, counts, target, vocab)


def load_features_csv(path, schema_names, schema_kinds, schema_vocab) -> np.ndarray:
    """Read a feature-only CSV against a training schema.

    Columns are matched by name; categorical labels unseen at training
    time are an error (there is no code to give them).
    """
    rows, header = _read_rows(path)
    idx = []
    for name in schema_names:
        if name not in header:
            raise DataError(f"feature column {name!r} missing from {path}")
        idx.append(header.index(name))
    n, k = len(rows), len(schema_names)
    feats = np.empty((n, k), dtype=np.float64)
    luts = {
        j: {label: c for c, label in enumerate(schema_vocab.get(j, []))}
        for j in range(k)
        if schema_kinds[j] == CATEGORICAL
    }
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j in range(k):
            raw = row[idx[j]]
            if schema_kinds[j] == NUMERIC:
                feats[i, j] = _parse_float(raw, path, i, schema_names[j])
            else:
                code = luts[j].get(raw)
                if code is None:
                    raise DataError(
                        f"{path}: row {i + 2}: unseen level {raw!r} in column {schema_names[j]!r}"
                    )
                feats[i, j] = float(code)
    return feats


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            return list(reader), header
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse_float(text: str, path, row_i: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(
            f"{path}: row {row_i + 2}, column {col!r}: {text!r} is not numeric"
        ) from None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(data: Dataset, path) -> None:
    """Write target-first CSV; floats at 17 significant digits (exact round-trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([data.target_name] + data.names)
        for i in range(data.n_rows):
            row = [_fmt(data.target[i])]
            for j in range(data.n_cols):
                if data.kinds[j] == CATEGORICAL:
                    row.append(_level_label(data, j, int(data.features[i, j])))
                else:
                    row.append(_fmt(data.features[i, j]))
            writer.writerow(row)


@dataclass(frozen=True)
class SplitPlan:
    """Train/test split: seeded permutation or chronological prefix."""

    mode: str = "random"
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("random", "chronological"):
            raise DataError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must be strictly between 0 and 1")


def split(data: Dataset, plan: SplitPlan) -> tuple[Dataset, Dataset]:
    """Partition rows into train/test; both sides keep original row order."""
    n = data.n_rows
    n_train = ceil_count(plan.train_fraction, n)
    if n_train >= n or n_train < 1:
        raise DataError(f"split of {n} rows at {plan.train_fraction} leaves an empty side")
    if plan.mode == "chronological":
        train_rows = np.arange(n_train, dtype=np.int64)
        test_rows = np.arange(n_train, n, dtype=np.int64)
    else:
        perm = rng_from_key(mix64(plan.seed, SALT_SPLIT)).permutation(n)
        train_rows = np.sort(perm[:n_train])
        test_rows = np.sort(perm[n_train:])
    return data.subset(train_rows), data.subset(test_rows)


def outlier_filter(preds: np.ndarray, train_target: np.ndarray, fallback) -> np.ndarray:
    """Replace wild predictions by a fallback.

    A prediction is wild when its distance from the training mean strictly
    exceeds twice the largest training distance from that mean.  `fallback`
    may be a vector aligned with `preds` or a scalar.
    """
    preds = np.asarray(preds, dtype=np.float64)
    y = np.asarray(train_target, dtype=np.float64)
    fb = np.asarray(fallback, dtype=np.float64)
    if fb.ndim > 0 and fb.shape != preds.shape:
        raise DataError("fallback vector shape does not match predictions")
    center = y.mean()
    radius = 2.0 * np.max(np.abs(y - center))
    return np.where(np.abs(preds - center) > radius, fb, preds)
