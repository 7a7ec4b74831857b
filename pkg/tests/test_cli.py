import json
from pathlib import Path

import numpy as np
import pytest

from resplite.cli import main
from resplite.tabular import load_binary


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("clidata")
    assert main(["synth", "--out-dir", str(out), "--seed", "2",
                 "--rows-per-day", "150"]) == 0
    return out


@pytest.fixture(scope="module")
def caches(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("caches")
    rc = main([
        "ingest", "--schema", str(data / "schema.json"),
        "--out-dir", str(out),
        str(data / "train.csv"), str(data / "test.csv"),
    ])
    assert rc == 0
    return out


class TestSynthAndIngest:
    def test_synth_emits_expected_files(self, data):
        for name in ("train.csv", "test.csv", "truth.json", "schema.json"):
            assert (data / name).exists()

    def test_ingest_round_trips(self, data, caches):
        table = load_binary(caches / "train.rlt")
        assert table.n_rows == 150 * 22
        assert table.schema.day_column == "day"


class TestAdversarialCommand:
    def test_audit_drops_planted_shift(self, caches, tmp_path, capsys):
        rc = main([
            "adversarial",
            "--train", str(caches / "train.rlt"),
            "--test", str(caches / "test.rlt"),
            "--subsample-per-side", "4000",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "x4" in out and "drop" in out
        doc = json.loads((tmp_path / "adversarial_report.json").read_text())
        verdicts = {f["name"]: f["verdict"] for f in doc["features"]}
        assert verdicts["x4"] == "drop"
        assert (tmp_path / "adversarial_auc.svg").exists()


class TestDenoiseAndCorrelate:
    def test_denoise_writes_estimates_and_table(self, caches, tmp_path):
        rc = main([
            "denoise", "--table", str(caches / "train.rlt"),
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        doc = json.loads((tmp_path / "delta_estimates.json").read_text())
        detected = {
            e["feature"]: e["delta"] for e in doc["estimates"] if e["detected"]
        }
        assert set(detected) == {"x2", "x3"}
        assert detected["x2"] == pytest.approx(0.0385, rel=1e-6)
        table = load_binary(tmp_path / "denoised.rlt")
        assert "x2" in table.schema.names

    def test_correlate_writes_square_matrix(self, caches, tmp_path):
        out = tmp_path / "corr.csv"
        rc = main(["correlate", "--table", str(caches / "train.rlt"),
                   "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        n = len(lines[0].split(",")) - 1
        assert len(lines) == n + 1


class TestEncodeCommand:
    def test_fit_and_reapply(self, caches, tmp_path):
        spec = [
            {"feature": "c0", "kind": "frequency", "window": "prev_week"},
            {"feature": "c0", "kind": "target", "target": "install"},
        ]
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        fit_dir = tmp_path / "fit"
        rc = main([
            "encode", "--table", str(caches / "train.rlt"),
            "--spec", str(spec_path), "--out-dir", str(fit_dir),
        ])
        assert rc == 0
        encoded = load_binary(fit_dir / "encoded.rlt")
        assert "c0__freq_prev_week" in encoded.schema.names
        assert "c0__te_install" in encoded.schema.names
        # re-apply the fitted state to the test table
        re_dir = tmp_path / "re"
        rc = main([
            "encode", "--table", str(caches / "test.rlt"),
            "--state", str(fit_dir / "encoders.json"),
            "--out-dir", str(re_dir),
        ])
        assert rc == 0
        test_encoded = load_binary(re_dir / "encoded.rlt")
        assert "c0__te_install" in test_encoded.schema.names


class TestTrainAndEvaluate:
    def test_train_then_evaluate_predictions(self, caches, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({
            "num_leaves": 15, "learning_rate": 0.15, "num_iterations": 30,
            "early_stopping_rounds": 10, "min_data_in_leaf": 10,
        }))
        train_dir = tmp_path / "train_out"
        rc = main([
            "train", "--table", str(caches / "train.rlt"),
            "--valid-day", "66", "--params", str(params),
            "--predict", str(caches / "test.rlt"),
            "--out-dir", str(train_dir),
        ])
        assert rc == 0
        assert (train_dir / "model.json").exists()
        assert (train_dir / "predictions.csv").exists()
        metrics_out = tmp_path / "metrics.json"
        rc = main([
            "evaluate",
            "--predictions", str(train_dir / "predictions.csv"),
            "--table", str(caches / "test.rlt"),
            "--out", str(metrics_out),
        ])
        assert rc == 0
        doc = json.loads(metrics_out.read_text())
        assert set(doc) == {"logloss", "auc", "nce", "background_rate"}
        assert doc["nce"] < 1.0

    def test_evaluate_missing_row_id_fails(self, caches, tmp_path):
        preds = tmp_path / "preds.csv"
        preds.write_text("0,0.5\n")
        with pytest.raises(SystemExit, match="missing"):
            main([
                "evaluate", "--predictions", str(preds),
                "--table", str(caches / "test.rlt"),
                "--out", str(tmp_path / "m.json"),
            ])


class TestRunAndAblate:
    def make_config(self, data, out_dir, tmp_path):
        doc = {
            "paths": {
                "train": str(data / "train.csv"),
                "test": str(data / "test.csv"),
                "output_dir": str(out_dir),
            },
            "schema": json.loads((data / "schema.json").read_text()),
            "split": {"valid_day": 66},
            "stages": {"adversarial": False},
            "adversarial": {"subsample_per_side": 2000},
            "gbdt": {
                "num_leaves": 15, "learning_rate": 0.15, "num_iterations": 30,
                "early_stopping_rounds": 10, "min_data_in_leaf": 10,
            },
            "seed": 3,
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return path

    def test_run_command(self, data, tmp_path, capsys):
        config = self.make_config(data, tmp_path / "out", tmp_path)
        rc = main(["run", "--config", str(config)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "valid logloss=" in out
        assert (tmp_path / "out" / "report.json").exists()

    def test_run_bad_stage_exits_nonzero(self, data, tmp_path, capsys):
        config = self.make_config(data, tmp_path / "out2", tmp_path)
        doc = json.loads(config.read_text())
        doc["split"]["valid_day"] = 99
        config.write_text(json.dumps(doc))
        rc = main(["run", "--config", str(config)])
        assert rc == 1
        assert "stage split" in capsys.readouterr().err

    def test_ablate_command(self, data, tmp_path, capsys):
        config = self.make_config(data, tmp_path / "ab", tmp_path)
        rc = main(["ablate", "--config", str(config), "--stages", "frequency"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "vanilla:" in out and "+frequency:" in out
        assert (tmp_path / "ab" / "ablation.csv").exists()
