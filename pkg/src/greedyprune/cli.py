"""Command-line front end: fit/predict plus the three experiment drivers.

Every run writes its outputs into ``--out`` together with ``config.echo``
(the effective settings as reloadable ``key = value`` lines) and
``manifest.json`` (command, master seed, and a SHA-256 per artifact), so any
result can be reproduced from its manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from .boosting import BoostModel, boost_predict
from .data import _fmt, load_csv, load_features_csv
from .dgp import DGP_KINDS, DgpSpec
from .ensemble import (
    RECIPE_NAMES,
    EnsembleModel,
    ensemble_fit,
    ensemble_predict,
    make_recipe,
)
from .errors import ConfigError, DataError, LearnerError
from .linear import GreedyLsModel, OlsModel, linear_predict
from .mars import MarsModel, mars_predict
from .model_io import load_model, save_model
from .randomization import SeedSpec
from .simulation import (
    BENCH_MODELS,
    SWEEP_FAMILIES,
    VARIANT_NAMES,
    SweepSpec,
    r2_score,
    run_bench,
    run_fig2,
    run_sweep,
    write_bench_csv,
    write_fig2_csv,
    write_sweep_csv,
    write_sweep_summary_csv,
)
from .svg import PALETTE, Series, line_plot, write_svg
from .tree import TreeModel
from .tree import predict as tree_predict

__all__ = ["main"]

_FACET_DGPS = ("friedman1", "friedman2", "friedman3", "linear", "tree")

# Recipe knobs accepted by fit configs, with their value parsers.
_INT_KEYS = {
    "b_members",
    "replicas",
    "min_node",
    "max_depth",
    "steps",
    "interaction_depth",
    "max_terms",
    "max_degree",
}
_FLOAT_KEYS = {
    "rate",
    "mtry",
    "feature_drop",
    "stage_subsample",
    "noise_sd_fraction",
    "shuffle_fraction",
    "learning_rate",
    "subsample",
    "tol",
    "restart_floor",
}
_BOOL_KEYS = {"augment"}
_STR_KEYS = {"resample_kind"}
_RECIPE_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS
_NULLABLE_KEYS = {"max_depth", "stage_subsample", "restart_floor"}


# ---------------------------------------------------------------------------
# config files


def parse_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment, blanks ignored."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(raw_lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


def _parse_bool(key: str, text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {text!r}")


def _parse_int_list(key: str, text: str) -> tuple[int, ...]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"{key} must be a comma-separated list of integers")
    return tuple(_parse_int(key, t) for t in items)


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


class _Config:
    """Merged config-file + flag settings with typed, tracked access."""

    def __init__(self, values: dict[str, str], command: str):
        self.values = dict(values)
        self.command = command
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.values

    def raw(self, key: str, default: str | None = None) -> str | None:
        self.used.add(key)
        return self.values.get(key, default)

    def get_str(self, key: str, default: str) -> str:
        value = self.raw(key)
        return default if value is None else value

    def get_int(self, key: str, default: int) -> int:
        value = self.raw(key)
        return default if value is None else _parse_int(key, value)

    def get_float(self, key: str, default: float) -> float:
        value = self.raw(key)
        return default if value is None else _parse_float(key, value)

    def get_int_list(self, key: str, default: tuple[int, ...] | None) -> tuple[int, ...] | None:
        value = self.raw(key)
        return default if value is None else _parse_int_list(key, value)

    def get_str_list(self, key: str, default: tuple[str, ...]) -> tuple[str, ...]:
        value = self.raw(key)
        return default if value is None else _parse_str_list(value)

    def reject_unknown(self) -> None:
        unknown = sorted(set(self.values) - self.used - {"threads", "out"})
        if unknown:
            raise ConfigError(
                f"unknown config key(s) for {self.command}: {', '.join(unknown)}"
            )


def _merge_flags(args: argparse.Namespace) -> dict[str, str]:
    """File values first, then every explicitly-given flag on top."""
    values: dict[str, str] = {}
    if args.config:
        values.update(parse_config(args.config))
    for flag in ("data", "target", "categorical", "recipe", "seed", "model"):
        flag_value = getattr(args, flag, None)
        if flag_value is not None:
            values[flag] = str(flag_value)
    return values


def _resolve_out(args: argparse.Namespace, values: dict[str, str]) -> str:
    if args.out is not None:
        return args.out
    return values.get("out", ".")


def _resolve_threads(args: argparse.Namespace, values: dict[str, str]) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    if "threads" in values:
        return max(1, _parse_int("threads", values["threads"]))
    env = os.environ.get("GREEDYPRUNE_THREADS")
    if env:
        return max(1, _parse_int("GREEDYPRUNE_THREADS", env))
    return 1


# ---------------------------------------------------------------------------
# manifest plumbing


class _Run:
    """Collects artifacts for one command and writes echo + manifest."""

    def __init__(self, command: str, out_dir: str, seed_value: int):
        self.command = command
        self.out_dir = out_dir
        self.seed_value = seed_value
        self.echo: dict[str, str] = {}
        self.artifacts: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        self.artifacts.append(name)
        return os.path.join(self.out_dir, name)

    def record(self, key: str, value) -> None:
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, (tuple, list)):
            text = ",".join(str(v) for v in value)
        else:
            text = str(value)
        self.echo[key] = text

    def finish(self, error: str | None = None) -> None:
        echo_path = os.path.join(self.out_dir, "config.echo")
        with open(echo_path, "w", encoding="utf-8") as fh:
            for key in sorted(self.echo):
                fh.write(f"{key} = {self.echo[key]}\n")
        hashes = {}
        for name in self.artifacts:
            full = os.path.join(self.out_dir, name)
            if os.path.exists(full):
                with open(full, "rb") as fh:
                    hashes[name] = hashlib.sha256(fh.read()).hexdigest()
        manifest = {
            "format": 1,
            "command": self.command,
            "master_seed": self.seed_value,
            "config": dict(sorted(self.echo.items())),
            "artifacts": hashes,
        }
        if error is not None:
            manifest["error"] = error
        with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _run_command(command: str, out_dir: str, seed_value: int, body) -> int:
    """Execute ``body(run)``; the manifest is written even when it raises."""
    run = _Run(command, out_dir, seed_value)
    try:
        body(run)
    except BaseException as exc:
        run.finish(error=f"{type(exc).__name__}: {exc}")
        raise
    run.finish()
    return 0


# ---------------------------------------------------------------------------
# fit / predict


def _recipe_overrides(cfg: _Config) -> dict[str, object]:
    out: dict[str, object] = {}
    for key in sorted(_RECIPE_KEYS):
        if not cfg.has(key):
            continue
        raw = cfg.raw(key)
        assert raw is not None
        if key in _NULLABLE_KEYS and raw.lower() == "none":
            out[key] = None
        elif key in _INT_KEYS:
            out[key] = _parse_int(key, raw)
        elif key in _FLOAT_KEYS:
            out[key] = _parse_float(key, raw)
        elif key in _BOOL_KEYS:
            out[key] = _parse_bool(key, raw)
        else:
            out[key] = raw
    return out


def cmd_fit(args: argparse.Namespace) -> int:
    values = _merge_flags(args)
    threads = _resolve_threads(args, values)
    cfg = _Config(values, "fit")
    data_path = cfg.raw("data")
    if data_path is None:
        raise ConfigError("fit needs a dataset: pass --data or set data in the config")
    target = cfg.get_str("target", "y")
    categorical = cfg.get_str_list("categorical", ())
    recipe = cfg.get_str("recipe", "rf")
    seed_value = cfg.get_int("seed", 0)
    overrides = _recipe_overrides(cfg)
    cfg.reject_unknown()

    def body(run: _Run) -> None:
        run.record("data", data_path)
        run.record("target", target)
        run.record("categorical", categorical)
        run.record("recipe", recipe)
        run.record("seed", seed_value)
        for key, value in overrides.items():
            run.record(key, value)
        train = load_csv(data_path, target=target, categorical=categorical)
        spec = make_recipe(recipe, seed=SeedSpec(seed_value, 0), **overrides)
        model = ensemble_fit(train, spec, threads=threads)
        save_model(run.path("model.json"), model)
        print(f"train_r2 = {_fmt(r2_score(train.target, model.train_fitted))}")

    return _run_command("fit", _resolve_out(args, values), seed_value, body)


def _predict_any(model: object, features_path: str, target: str) -> np.ndarray:
    """Dispatch prediction over every loadable model kind."""
    if isinstance(model, EnsembleModel):
        feats = load_features_csv(features_path, model.names, model.kinds, model.categories)
        return ensemble_predict(model, feats)
    # Base models carry no column names: take the CSV's columns in file
    # order, dropping a target column when one is present.
    from .data import _read_rows

    rows, header = _read_rows(features_path)
    keep = [j for j, name in enumerate(header) if name != target]
    n_features: int = model.n_features  # type: ignore[attr-defined]
    if len(keep) != n_features:
        raise DataError(
            f"{features_path}: model expects {n_features} feature columns, "
            f"found {len(keep)}"
        )
    feats = np.empty((len(rows), len(keep)), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{features_path}: row {i + 2} has {len(row)} fields, expected {len(header)}"
            )
        for jj, j in enumerate(keep):
            try:
                feats[i, jj] = float(row[j])
            except ValueError:
                raise DataError(
                    f"{features_path}: row {i + 2}, column {header[j]!r}: "
                    f"{row[j]!r} is not numeric"
                ) from None
    if isinstance(model, TreeModel):
        return tree_predict(model, feats)
    if isinstance(model, BoostModel):
        return boost_predict(model, feats)
    if isinstance(model, MarsModel):
        return mars_predict(model, feats)
    if isinstance(model, (GreedyLsModel, OlsModel)):
        return linear_predict(model, feats)
    raise DataError(f"cannot predict with model of type {type(model).__name__}")


def cmd_predict(args: argparse.Namespace) -> int:
    values = _merge_flags(args)
    cfg = _Config(values, "predict")
    model_path = cfg.raw("model")
    data_path = cfg.raw("data")
    if model_path is None or data_path is None:
        raise ConfigError("predict needs --model and --data (or config equivalents)")
    target = cfg.get_str("target", "y")
    seed_value = cfg.get_int("seed", 0)
    cfg.reject_unknown()

    def body(run: _Run) -> None:
        run.record("model", model_path)
        run.record("data", data_path)
        run.record("target", target)
        model = load_model(model_path)
        preds = _predict_any(model, data_path, target)
        with open(run.path("predictions.csv"), "w", encoding="utf-8") as fh:
            fh.write("prediction\n")
            for v in preds:
                fh.write(_fmt(v) + "\n")
        print(f"wrote {len(preds)} predictions")

    return _run_command("predict", _resolve_out(args, values), seed_value, body)


# ---------------------------------------------------------------------------
# experiment drivers


def _sweep_svg(result, dgp_kind: str, family: str) -> str:
    series = []
    for i, variant in enumerate(result.spec.variants):
        xs = tuple(float(d) for d in result.spec.depth_grid)
        ys = tuple(result.curve(variant, "r2_true_test", "median"))
        series.append(Series(label=variant, xs=xs, ys=ys, color=PALETTE[i % len(PALETTE)]))
    return line_plot(
        series,
        title=f"{dgp_kind} / {family}",
        x_label="depth (stages / terms / inverse min_node)",
        y_label="median R2 against the conditional mean",
        x_log=True,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    values = _merge_flags(args)
    threads = _resolve_threads(args, values)
    cfg = _Config(values, "simulate")
    dgps = cfg.get_str_list("dgps", _FACET_DGPS)
    families = cfg.get_str_list("families", SWEEP_FAMILIES)
    variants = cfg.get_str_list("variants", VARIANT_NAMES)
    n = cfg.get_int("n", 200)
    n_test = cfg.get_int("n_test", 500)
    snr = cfg.get_float("snr", 4.0)
    replications = cfg.get_int("replications", 2)
    b_members = cfg.get_int("b_members", 20)
    seed_value = cfg.get_int("seed", 0)
    grids = {
        family: cfg.get_int_list(f"{family}_grid", None) for family in SWEEP_FAMILIES
    }
    cfg.reject_unknown()
    for kind in dgps:
        if kind not in DGP_KINDS:
            raise ConfigError(f"unknown dgp kind {kind!r}; expected one of {DGP_KINDS}")
    for family in families:
        if family not in SWEEP_FAMILIES:
            raise ConfigError(
                f"unknown family {family!r}; expected one of {SWEEP_FAMILIES}"
            )

    def body(run: _Run) -> None:
        run.record("dgps", dgps)
        run.record("families", families)
        run.record("variants", variants)
        run.record("n", n)
        run.record("n_test", n_test)
        run.record("snr", snr)
        run.record("replications", replications)
        run.record("b_members", b_members)
        run.record("seed", seed_value)
        for family in SWEEP_FAMILIES:
            if grids[family] is not None:
                run.record(f"{family}_grid", grids[family])
        for di, kind in enumerate(dgps):
            for fi, family in enumerate(families):
                spec = SweepSpec(
                    dgp=DgpSpec(kind=kind, n=n, snr=snr, n_test=n_test),
                    family=family,
                    variants=variants,
                    depth_grid=grids[family] or (),
                    replications=replications,
                    b_members=b_members,
                    seed=SeedSpec(seed_value, di * len(SWEEP_FAMILIES) + fi),
                )
                result = run_sweep(spec, threads=threads)
                stem = f"sweep_{kind}_{family}"
                write_sweep_csv(result, run.path(f"{stem}.csv"))
                write_sweep_summary_csv(result, run.path(f"{stem}_summary.csv"))
                write_svg(run.path(f"{stem}.svg"), _sweep_svg(result, kind, family))
                print(f"{stem}: {len(result.records)} records")

    return _run_command("simulate", _resolve_out(args, values), seed_value, body)


def cmd_fig2(args: argparse.Namespace) -> int:
    values = _merge_flags(args)
    cfg = _Config(values, "fig2")
    grid = cfg.get_int_list("grid", (0, 30, 60, 90, 120))
    n_models = cfg.get_int("n_models", 50)
    n_bags = cfg.get_int("n_bags", 20)
    n = cfg.get_int("n", 100)
    n_test = cfg.get_int("n_test", 1000)
    snr = cfg.get_float("snr", 2.0)
    steps = cfg.get_int("steps", 100)
    replications = cfg.get_int("replications", 1)
    seed_value = cfg.get_int("seed", 0)
    cfg.reject_unknown()

    def body(run: _Run) -> None:
        run.record("grid", grid)
        run.record("n_models", n_models)
        run.record("n_bags", n_bags)
        run.record("n", n)
        run.record("n_test", n_test)
        run.record("snr", snr)
        run.record("steps", steps)
        run.record("replications", replications)
        run.record("seed", seed_value)
        points = run_fig2(
            seed=SeedSpec(seed_value, 0),
            grid=grid,
            n_models=n_models,
            n_bags=n_bags,
            n=n,
            n_test=n_test,
            snr=snr,
            steps=steps,
            replications=replications,
        )
        write_fig2_csv(points, run.path("fig2.csv"))
        xs = tuple(float(p.n_useless) for p in points)
        svg = line_plot(
            [
                Series("greedy ensemble", xs, tuple(p.log_ratio_greedy for p in points), PALETTE[0]),
                Series("ols ensemble", xs, tuple(p.log_ratio_ols for p in points), PALETTE[1]),
            ],
            title="ln MSE ratio vs oracle as junk features grow",
            x_label="number of useless regressors",
            y_label="ln(MSE / oracle MSE)",
        )
        write_svg(run.path("fig2.svg"), svg)
        for p in points:
            print(
                f"x={p.n_useless}: greedy {_fmt(p.log_ratio_greedy)}, "
                f"ols {_fmt(p.log_ratio_ols)}"
            )

    return _run_command("fig2", _resolve_out(args, values), seed_value, body)


def cmd_bench(args: argparse.Namespace) -> int:
    values = _merge_flags(args)
    threads = _resolve_threads(args, values)
    cfg = _Config(values, "bench")
    train_path = cfg.raw("train")
    test_path = cfg.raw("test")
    if train_path is None or test_path is None:
        raise ConfigError("bench needs train and test CSV paths (train= / test=)")
    target = cfg.get_str("target", "y")
    categorical = cfg.get_str_list("categorical", ())
    models = cfg.get_str_list("models", BENCH_MODELS)
    b_members = cfg.get_int("b_members", 100)
    folds = cfg.get_int("folds", 5)
    test_kind = cfg.get_str("test_kind", "t")
    lag = cfg.get_int("lag", 0)
    boost_grid = cfg.get_int_list("boost_grid", None)
    mars_grid = cfg.get_int_list("mars_grid", None)
    seed_value = cfg.get_int("seed", 0)
    cfg.reject_unknown()

    def body(run: _Run) -> None:
        run.record("train", train_path)
        run.record("test", test_path)
        run.record("target", target)
        run.record("categorical", categorical)
        run.record("models", models)
        run.record("b_members", b_members)
        run.record("folds", folds)
        run.record("test_kind", test_kind)
        run.record("lag", lag)
        if boost_grid is not None:
            run.record("boost_grid", boost_grid)
        if mars_grid is not None:
            run.record("mars_grid", mars_grid)
        run.record("seed", seed_value)
        train = load_csv(train_path, target=target, categorical=categorical)
        test = load_csv(test_path, target=target, categorical=categorical)
        rows = run_bench(
            train,
            test,
            models=models,
            b_members=b_members,
            folds=folds,
            boost_grid=boost_grid,
            mars_grid=mars_grid,
            seed=SeedSpec(seed_value, 0),
            test_kind=test_kind,
            lag=lag,
            threads=threads,
        )
        write_bench_csv(rows, run.path("bench.csv"))
        xs = tuple(float(i) for i in range(len(rows)))
        svg = line_plot(
            [
                Series("train R2", xs, tuple(r.r2_train for r in rows), PALETTE[0]),
                Series("test R2", xs, tuple(r.r2_test for r in rows), PALETTE[1]),
            ],
            title="benchmark fits by model index",
            x_label="model index (see bench.csv order)",
            y_label="R2",
        )
        write_svg(run.path("bench.svg"), svg)
        for row in rows:
            print(f"{row.model}: train {_fmt(row.r2_train)}, test {_fmt(row.r2_test)}")

    return _run_command("bench", _resolve_out(args, values), seed_value, body)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedyprune",
        description="Fit randomized greedy ensembles and run the experiment drivers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", default=None, help="output directory (default .)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")

    p_fit = sub.add_parser("fit", help="fit a recipe to a CSV and save model JSON")
    common(p_fit)
    p_fit.add_argument("--data", help="training CSV path")
    p_fit.add_argument("--target", help="target column name (default y)")
    p_fit.add_argument("--categorical", help="comma-separated categorical columns")
    p_fit.add_argument(
        "--recipe", help=f"one of {', '.join(RECIPE_NAMES)} (default rf)"
    )
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict a feature CSV with a saved model")
    common(p_pred)
    p_pred.add_argument("--model", help="model JSON path")
    p_pred.add_argument("--data", help="feature CSV path")
    p_pred.add_argument("--target", help="target column to ignore if present")
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="depth sweeps over dgp x family facets")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_fig2 = sub.add_parser("fig2", help="junk-feature robustness of averaged linear fits")
    common(p_fig2)
    p_fig2.set_defaults(func=cmd_fig2)

    p_bench = sub.add_parser("bench", help="benchmark table on train/test CSVs")
    common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except LearnerError as exc:
        print(f"learner error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
