"""Command-line interface: configs, commands, manifests, exit codes."""

from __future__ import annotations

import json
import shutil
import subprocess

import numpy as np
import pytest

from greedyprune.cli import build_parser, main, parse_config, _resolve_threads
from greedyprune.data import write_csv
from greedyprune.dgp import DgpSpec, generate
from greedyprune.errors import ConfigError
from greedyprune.model_io import save_model
from greedyprune.randomization import SeedSpec
from greedyprune.tree import TreeParams, grow


def write_train_csv(tmp_path, name="train.csv", n=40, seed=10):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 3))
    y = 2.0 * X[:, 0] + np.sin(3.0 * X[:, 1]) + 0.05 * rng.normal(size=n)
    path = tmp_path / name
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x1,x2,x3,y\n")
        for i in range(n):
            fh.write(f"{float(X[i, 0])!r},{float(X[i, 1])!r},{float(X[i, 2])!r},{float(y[i])!r}\n")
    return path, X, y


class TestConfigParsing:
    def test_key_value_comments_blanks(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("a = 1\n\n# comment\nb = x,y # trailing\n")
        assert parse_config(str(path)) == {"a": "1", "b": "x,y"}

    def test_malformed_line_reports_location(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("a = 1\nnonsense\n")
        with pytest.raises(ConfigError, match=r"bad\.cfg:2"):
            parse_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(str(tmp_path / "absent.cfg"))

    def test_threads_resolution(self, tmp_path, monkeypatch):
        args = build_parser().parse_args(["simulate"])
        monkeypatch.delenv("GREEDYPRUNE_THREADS", raising=False)
        assert _resolve_threads(args, {}) == 1
        monkeypatch.setenv("GREEDYPRUNE_THREADS", "6")
        assert _resolve_threads(args, {}) == 6
        assert _resolve_threads(args, {"threads": "3"}) == 3
        args = build_parser().parse_args(["simulate", "--threads", "2"])
        assert _resolve_threads(args, {"threads": "3"}) == 2


class TestFitPredict:
    def test_roundtrip_interpolates_training_data(self, tmp_path):
        train_path, _, y = write_train_csv(tmp_path)
        fit_dir = tmp_path / "fit"
        code = main(
            [
                "fit",
                "--config",
                str(self.write_fit_cfg(tmp_path, train_path)),
                "--out",
                str(fit_dir),
            ]
        )
        assert code == 0
        manifest = json.loads((fit_dir / "manifest.json").read_text())
        assert manifest["format"] == 1
        assert manifest["command"] == "fit"
        assert manifest["master_seed"] == 5
        assert set(manifest["artifacts"]) == {"model.json"}
        assert all(len(h) == 64 for h in manifest["artifacts"].values())
        assert manifest["config"]["recipe"] == "rf"

        pred_dir = tmp_path / "pred"
        code = main(
            [
                "predict",
                "--model",
                str(fit_dir / "model.json"),
                "--data",
                str(train_path),
                "--out",
                str(pred_dir),
            ]
        )
        assert code == 0
        lines = (pred_dir / "predictions.csv").read_text().splitlines()
        assert lines[0] == "prediction"
        preds = np.array([float(v) for v in lines[1:]])
        # One full-sample member growing to purity reproduces the target.
        np.testing.assert_allclose(preds, y, atol=1e-12)

    @staticmethod
    def write_fit_cfg(tmp_path, train_path):
        cfg = tmp_path / "fit.cfg"
        cfg.write_text(
            f"data = {train_path}\n"
            "recipe = rf\n"
            "b_members = 1\n"
            "resample_kind = subsample\n"
            "rate = 1.0\n"
            "mtry = 1.0\n"
            "min_node = 1\n"
            "seed = 5\n"
        )
        return cfg

    def test_flag_overrides_config(self, tmp_path):
        train_path, _, _ = write_train_csv(tmp_path)
        cfg = self.write_fit_cfg(tmp_path, train_path)
        out = tmp_path / "seeded"
        code = main(["fit", "--config", str(cfg), "--seed", "9", "--out", str(out)])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["master_seed"] == 9

    def test_predict_base_model_without_target_column(self, tmp_path):
        train_path, X, _ = write_train_csv(tmp_path)
        from greedyprune.data import load_csv

        train = load_csv(str(train_path), target="y")
        model = grow(train, TreeParams(min_node=5), SeedSpec(3, 0))
        model_path = tmp_path / "tree.json"
        save_model(str(model_path), model)
        feats_path = tmp_path / "feats.csv"
        with open(feats_path, "w", encoding="utf-8") as fh:
            fh.write("x1,x2,x3\n")
            for row in X[:7]:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        out = tmp_path / "basepred"
        code = main(
            [
                "predict",
                "--model",
                str(model_path),
                "--data",
                str(feats_path),
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = (out / "predictions.csv").read_text().splitlines()
        assert len(lines) == 8

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        train_path, _, _ = write_train_csv(tmp_path)
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(f"data = {train_path}\nbogus = 1\n")
        code = main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_data_is_config_error(self, tmp_path):
        assert main(["fit", "--out", str(tmp_path / "o")]) == 2

    def test_unreadable_data_is_data_error(self, tmp_path):
        out = tmp_path / "o"
        code = main(
            ["fit", "--data", str(tmp_path / "absent.csv"), "--out", str(out)]
        )
        assert code == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert "error" in manifest


class TestSimulateCommand:
    def simulate_cfg(self, tmp_path):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(
            "dgps = friedman1\n"
            "families = boosting\n"
            "variants = plain,bp\n"
            "n = 50\n"
            "n_test = 40\n"
            "replications = 1\n"
            "b_members = 3\n"
            "boosting_grid = 5,17\n"
            "seed = 2\n"
        )
        return cfg

    def test_artifacts_and_echo_rerun(self, tmp_path):
        cfg = self.simulate_cfg(tmp_path)
        out1 = tmp_path / "run1"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        stem = "sweep_friedman1_boosting"
        for name in (f"{stem}.csv", f"{stem}_summary.csv", f"{stem}.svg",
                     "config.echo", "manifest.json"):
            assert (out1 / name).exists()

        # The echoed config replays the exact run.
        out2 = tmp_path / "run2"
        assert main(
            ["simulate", "--config", str(out1 / "config.echo"), "--out", str(out2)]
        ) == 0
        for name in (f"{stem}.csv", f"{stem}_summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_threads_do_not_change_artifacts(self, tmp_path):
        cfg = self.simulate_cfg(tmp_path)
        out1 = tmp_path / "t1"
        out4 = tmp_path / "t4"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1),
                     "--threads", "1"]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out4),
                     "--threads", "4"]) == 0
        name = "sweep_friedman1_boosting.csv"
        assert (out1 / name).read_bytes() == (out4 / name).read_bytes()

    def test_unknown_dgp_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dgps = friedman9\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


class TestFig2Command:
    def test_tiny_run(self, tmp_path):
        cfg = tmp_path / "fig2.cfg"
        cfg.write_text(
            "grid = 0,5\nn_models = 2\nn_bags = 2\nn = 30\nn_test = 40\nseed = 3\n"
        )
        out = tmp_path / "fig2"
        assert main(["fig2", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "fig2.csv").read_text().splitlines()
        assert len(lines) == 3
        assert (out / "fig2.svg").read_text().startswith("<svg")


class TestBenchCommand:
    def test_tiny_run(self, tmp_path):
        train, test = generate(
            DgpSpec(kind="friedman1", n=100, snr=4.0, n_test=60, seed=SeedSpec(30, 0))
        )
        train_path = tmp_path / "train.csv"
        test_path = tmp_path / "test.csv"
        write_csv(train.data, train_path)
        write_csv(test.data, test_path)
        cfg = tmp_path / "bench.cfg"
        cfg.write_text(
            f"train = {train_path}\n"
            f"test = {test_path}\n"
            "models = rf,boost_tuned,boost_bp\n"
            "b_members = 5\n"
            "folds = 3\n"
            "boost_grid = 5,17\n"
            "seed = 4\n"
        )
        out = tmp_path / "bench"
        assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "bench.csv").read_text().splitlines()
        assert lines[0] == "model,r2_train,r2_test,statistic,p_value,stars"
        assert [line.split(",")[0] for line in lines[1:]] == [
            "rf",
            "boost_tuned",
            "boost_bp",
        ]

    def test_missing_paths_rejected(self, tmp_path):
        assert main(["bench", "--out", str(tmp_path / "o")]) == 2


class TestEntryPoint:
    def test_console_script_help(self):
        exe = shutil.which("greedyprune")
        assert exe is not None
        proc = subprocess.run(
            [exe, "--help"], capture_output=True, text=True, timeout=60
        )
        assert proc.returncode == 0
        assert "fit" in proc.stdout and "bench" in proc.stdout
