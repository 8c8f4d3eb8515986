import json
import subprocess
import sys
import time

import numpy as np
import pytest

from tkgmlp.checkpoint import load_checkpoint
from tkgmlp.cli import main
from tkgmlp.data import load_csv
from tkgmlp.encoders import EncoderSpec


def write_config(tmp_path, name="cfg.json", **overrides):
    doc = {
        "seed": 42,
        "output_dir": str(tmp_path / "out"),
        "data": {"kind": "synth", "rows": [600, 200, 200], "columns": 8, "prevalence": 0.2},
        "encoder": {"kind": "qle", "n_bins": 8},
        "model": {"hidden_dim": 16, "kan_layers": 1, "gmlp_layers": 1, "grid_size": 5, "dropout": 0.0},
        "train": {"batch_size": 128, "max_epochs": 3, "lr0": 0.005, "patience": 20},
    }
    for key, value in overrides.items():
        if isinstance(value, dict):
            doc[key] = {**doc.get(key, {}), **value}
        else:
            doc[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


class TestSynth:
    def test_emits_three_csvs_and_oracle(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run_cli("synth", "--config", cfg) == 0
        out = tmp_path / "out"
        for name in ("train.csv", "valid.csv", "test.csv", "oracle.csv"):
            assert (out / name).exists()
        train = load_csv(out / "train.csv")
        assert train.n_rows == 600
        assert len(train.feature_names) == 8
        oracle_lines = (out / "oracle.csv").read_text().splitlines()
        assert oracle_lines[0] == "split,row,oracle_p"
        assert len(oracle_lines) == 1 + 1000

    def test_seed_repeat_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("synth", "--config", cfg)
        first = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
        run_cli("synth", "--config", cfg)
        second = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
        assert first == second

    def test_invalid_spec_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, data={"kind": "synth", "rows": [10]})
        assert run_cli("synth", "--config", cfg) == 1
        assert "rows" in capsys.readouterr().err

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("synth", "--config", cfg)
        first = (tmp_path / "out" / "train.csv").read_bytes()
        run_cli("synth", "--config", cfg, "--seed", 7)
        second = (tmp_path / "out" / "train.csv").read_bytes()
        assert first != second


class TestFit:
    def test_smoke_run_under_60s(self, tmp_path):
        cfg = write_config(tmp_path, data={"kind": "synth", "rows": [700, 150, 150]})
        start = time.perf_counter()
        assert run_cli("fit", "--config", cfg) == 0
        assert time.perf_counter() - start < 60.0
        out = tmp_path / "out"
        assert (out / "model.ckpt").exists()
        log_lines = (out / "epochs.tsv").read_text().splitlines()
        assert log_lines[0] == "epoch\tlr\ttrain_loss\tvalid_ks_pct\tvalid_auc_pct"
        assert len(log_lines) == 1 + 3

    def test_epoch_lines_on_stdout_with_elapsed(self, tmp_path, capsys):
        cfg = write_config(tmp_path, train={"max_epochs": 2, "batch_size": 128})
        run_cli("fit", "--config", cfg)
        lines = [l for l in capsys.readouterr().out.splitlines() if l and l[0].isdigit()]
        assert len(lines) == 2
        assert len(lines[0].split("\t")) == 6

    def test_checkpoint_reload_reproduces_valid_ks(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("fit", "--config", cfg)
        out = tmp_path / "out"
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        loaded = load_checkpoint(out / "model.ckpt")
        valid = load_csv(tmp_path / "data" / "valid.csv")
        from tkgmlp.metrics import ks as ks_fn
        scores, _ = loaded.model.forward(loaded.encoder.transform(valid.features), train=False)
        recomputed = ks_fn(scores, valid.labels)
        assert recomputed == pytest.approx(loaded.best["best_valid_ks"], abs=1e-12)

    def test_rerun_bit_identical_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("fit", "--config", cfg)
        out = tmp_path / "out"
        first = {name: (out / name).read_bytes() for name in ("model.ckpt", "epochs.tsv")}
        run_cli("fit", "--config", cfg)
        second = {name: (out / name).read_bytes() for name in ("model.ckpt", "epochs.tsv")}
        assert first == second

    def test_encoder_fitted_on_train_only(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("fit", "--config", cfg)
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        loaded = load_checkpoint(tmp_path / "out" / "model.ckpt")
        test_ds = load_csv(tmp_path / "data" / "test.csv")
        refit = EncoderSpec.fit(test_ds.features, feature_names=test_ds.feature_names,
                                kind="qle", n_bins=8)
        train_ds = load_csv(tmp_path / "data" / "train.csv")
        fit_on_train = EncoderSpec.fit(train_ds.features, feature_names=train_ds.feature_names,
                                       kind="qle", n_bins=8)
        stored = loaded.encoder.bins[0].boundaries
        assert np.array_equal(stored, fit_on_train.bins[0].boundaries)
        assert not np.array_equal(stored, refit.bins[0].boundaries)


class TestEvaluate:
    def test_overfit_training_data_scores_high(self, tmp_path, capsys):
        # small easy dataset + enough epochs: training-set KS should be high
        cfg = write_config(
            tmp_path,
            data={"kind": "synth", "rows": [300, 120, 120], "columns": 4, "prevalence": 0.3,
                  "signal_scale": 4.0},
            train={"batch_size": 64, "max_epochs": 25, "lr0": 0.01},
        )
        run_cli("fit", "--config", cfg)
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        capsys.readouterr()
        code = run_cli("evaluate", "--checkpoint", tmp_path / "out" / "model.ckpt",
                       "--data", tmp_path / "data" / "train.csv")
        assert code == 0
        out = capsys.readouterr().out
        values = dict(line.split("=") for line in out.splitlines() if "=" in line)
        assert set(values) == {"n_rows", "ks_pct", "auc_pct"}
        assert float(values["ks_pct"]) > 60.0
        assert values["n_rows"] == "300"

    def test_single_class_data_fails_cleanly(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        run_cli("fit", "--config", cfg)
        bad = tmp_path / "bad.csv"
        bad.write_text("x00,x01,x02,x03,x04,x05,x06,x07,label\n" +
                       "\n".join("0,0,0,0,0,0,0,0,1" for _ in range(5)) + "\n")
        code = run_cli("evaluate", "--checkpoint", tmp_path / "out" / "model.ckpt", "--data", bad)
        assert code == 2
        assert "positive and one negative" in capsys.readouterr().err


class TestGrid:
    def test_two_point_space_ranked(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            grid={"gmlp_layers": [1], "kan_layers": [1], "grid_size": [5],
                  "hidden_dim": [8, 16], "dropout": [0.0]},
            train={"max_epochs": 2, "batch_size": 128},
        )
        assert run_cli("grid", "--config", cfg) == 0
        lines = (tmp_path / "out" / "grid_results.tsv").read_text().splitlines()
        assert len(lines) == 3  # header + 2 configs
        header = lines[0].split("\t")
        assert header[:5] == ["rank", "config_index", "seed", "valid_ks_pct", "valid_auc_pct"]
        first = lines[1].split("\t")
        second = lines[2].split("\t")
        assert float(first[3]) >= float(second[3])  # ranked by KS desc
        out = capsys.readouterr().out
        assert "best_config_index=" in out

    def test_grid_requires_section(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run_cli("grid", "--config", cfg) == 1

    def test_rerun_reproduces_results(self, tmp_path):
        cfg = write_config(
            tmp_path,
            grid={"gmlp_layers": [1], "kan_layers": [1], "grid_size": [5],
                  "hidden_dim": [8], "dropout": [0.0, 0.3]},
            train={"max_epochs": 2, "batch_size": 128},
        )
        run_cli("grid", "--config", cfg)
        first = (tmp_path / "out" / "grid_results.tsv").read_bytes()
        run_cli("grid", "--config", cfg)
        assert (tmp_path / "out" / "grid_results.tsv").read_bytes() == first


class TestEncode:
    def make_data(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        return cfg

    def test_qle_outputs_in_unit_interval(self, tmp_path):
        cfg = self.make_data(tmp_path)
        out = tmp_path / "encoded.csv"
        code = run_cli("encode", "--config", cfg, "--data", tmp_path / "data" / "train.csv",
                       "--out", out)
        assert code == 0
        ds = load_csv(out)
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0

    def test_ple_expands_columns(self, tmp_path):
        cfg = self.make_data(tmp_path)
        out = tmp_path / "encoded.csv"
        run_cli("encode", "--config", cfg, "--set", "encoder.kind=ple",
                "--data", tmp_path / "data" / "train.csv", "--out", out)
        train_ds = load_csv(tmp_path / "data" / "train.csv")
        spec = EncoderSpec.fit(train_ds.features, feature_names=train_ds.feature_names,
                               kind="ple", n_bins=8)
        expected = sum(spec.bins[j].n for j in spec.bins)
        encoded = load_csv(out)
        assert len(encoded.feature_names) == expected

    def test_clr_rows_sum_to_zero(self, tmp_path):
        cfg = self.make_data(tmp_path)
        out = tmp_path / "encoded.csv"
        run_cli("encode", "--config", cfg, "--set", "encoder.kind=clr",
                "--data", tmp_path / "data" / "train.csv", "--out", out)
        encoded = load_csv(out)
        assert np.abs(encoded.features.sum(axis=1)).max() < 1e-10

    def test_fit_on_separate_train_file(self, tmp_path):
        cfg = self.make_data(tmp_path)
        out = tmp_path / "encoded.csv"
        code = run_cli("encode", "--config", cfg,
                       "--train", tmp_path / "data" / "train.csv",
                       "--data", tmp_path / "data" / "test.csv", "--out", out)
        assert code == 0
        assert load_csv(out).n_rows == 200


class TestCsvPipeline:
    def test_fit_from_single_csv_with_fractions(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        # stitch one file back together so the chronological split runs
        parts = [(tmp_path / "data" / f"{n}.csv").read_text().splitlines() for n in ("train", "valid", "test")]
        merged = tmp_path / "all.csv"
        merged.write_text("\n".join(parts[0] + parts[1][1:] + parts[2][1:]) + "\n")
        csv_cfg = write_config(
            tmp_path, name="csv_cfg.json",
            data={"kind": "csv", "path": str(merged), "fractions": [0.6, 0.2, 0.2]},
        )
        assert run_cli("fit", "--config", csv_cfg) == 0
        assert (tmp_path / "out" / "model.ckpt").exists()

    def test_fit_from_three_csvs(self, tmp_path):
        cfg = write_config(tmp_path)
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        csv_cfg = write_config(
            tmp_path, name="csv3_cfg.json",
            data={
                "kind": "csv",
                "train": str(tmp_path / "data" / "train.csv"),
                "valid": str(tmp_path / "data" / "valid.csv"),
                "test": str(tmp_path / "data" / "test.csv"),
            },
        )
        assert run_cli("fit", "--config", csv_cfg) == 0

    def test_evaluate_accepts_seed_flag(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        run_cli("fit", "--config", cfg)
        run_cli("synth", "--config", cfg, "--set", f"output_dir={tmp_path / 'data'}")
        code = run_cli("evaluate", "--checkpoint", tmp_path / "out" / "model.ckpt",
                       "--data", tmp_path / "data" / "valid.csv", "--seed", 9)
        assert code == 0


class TestExitCodes:
    def test_missing_config_file(self, capsys):
        assert run_cli("fit", "--config", "/nonexistent/cfg.json") == 1

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        doc = json.loads(cfg.read_text())
        doc["mystery"] = 1
        cfg.write_text(json.dumps(doc))
        assert run_cli("fit", "--config", cfg) == 1
        assert "mystery" in capsys.readouterr().err

    def test_usage_error(self, capsys):
        assert run_cli("fit") == 1  # --config is required

    def test_runtime_failure_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        missing = tmp_path / "ghost.csv"
        code = run_cli("evaluate", "--checkpoint", tmp_path / "nothing.ckpt", "--data", missing)
        assert code == 2


class TestConsoleScript:
    def test_module_entry_point(self, tmp_path):
        cfg = write_config(tmp_path)
        proc = subprocess.run(
            [sys.executable, "-m", "tkgmlp", "synth", "--config", str(cfg)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert (tmp_path / "out" / "train.csv").exists()
