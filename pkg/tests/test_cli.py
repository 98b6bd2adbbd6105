"""End-to-end command-line tests on a reduced synthetic fixture.

A module-scoped synth run provides signals; most commands operate on an
8-recording subset catalog (4 classes x 2 loads) to stay fast.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

import matwriter
from vibforge.catalog import Catalog, load_catalog, save_catalog
from vibforge.cli import main, read_segments_truth
from vibforge.baseline import read_features
from vibforge.folds import load_fold_plan, load_split


@pytest.fixture(scope="module")
def mini_env(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_mini")
    assert main(["synth", "--preset", "mini", "--out", str(root)]) == 0
    full = load_catalog(root / "catalog.csv")
    small = Catalog(
        datasets=dict(full.datasets),
        recordings=tuple(
            rec
            for rec in full.recordings
            if rec.load_value in (0.0, 1.0)
        ),
    )
    assert len(small.recordings) == 16
    save_catalog(small, root / "catalog_small.csv")
    one = Catalog(
        datasets=dict(full.datasets),
        recordings=tuple(
            rec for rec in full.recordings if rec.recording_id == "mini_H_L0_R0"
        ),
    )
    save_catalog(one, root / "catalog_one.csv")
    return root


@pytest.fixture(scope="module")
def features_csv(mini_env):
    out = mini_env / "feat_run"
    code = main(
        [
            "features",
            "--catalog", str(mini_env / "catalog_small.csv"),
            "--out", str(out),
        ]
    )
    assert code == 0
    return out / "features.csv"


@pytest.fixture(scope="module")
def trained_run(mini_env, features_csv):
    out = mini_env / "train_run"
    code = main(
        [
            "train-baseline",
            "--catalog", str(mini_env / "catalog_small.csv"),
            "--out", str(out),
            "--features", str(features_csv),
            "--max-epochs", "30",
            "--val-fraction", "0.1",
        ]
    )
    assert code == 0
    return out


# --- argument handling ----------------------------------------------------------

def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert re.match(r"\d+\.\d+", capsys.readouterr().out.strip())


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["folds"]) == 1  # missing required --rule/--catalog
    capsys.readouterr()


def test_data_errors_exit_2(tmp_path, capsys):
    code = main(["segment", "--catalog", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert re.match(r"^FileNotFoundError: ", err)


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    code = main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    assert capsys.readouterr().err.startswith("ConfigError:")


# --- synth ------------------------------------------------------------------------

def test_synth_fixture_layout(mini_env, capsys):
    assert (mini_env / "catalog.csv").is_file()
    assert len(list((mini_env / "signals").glob("*.csv"))) == 32
    record = json.loads((mini_env / "run_synth.json").read_text())
    assert record["tool"] == "vibforge"
    assert record["subcommand"] == "synth"
    assert "config_hash" in record and "version" in record


def test_synth_rejects_unknown_preset(tmp_path, capsys):
    assert main(["synth", "--preset", "jumbo", "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("InvalidSpec:")


# --- segment ------------------------------------------------------------------------

def test_segment_manifest(mini_env, tmp_path, capsys):
    out = tmp_path / "seg"
    args = [
        "segment",
        "--catalog", str(mini_env / "catalog_small.csv"),
        "--out", str(out),
    ]
    assert main(args) == 0
    assert "enumerated 640 segments from 16 recordings" in capsys.readouterr().out
    manifest = out / "segments.csv"
    lines = manifest.read_text().splitlines()
    assert lines[0] == "segment_id,recording_id,dataset_id,label,sampling_rate_hz,segment_samples"
    assert len(lines) == 1 + 640
    assert lines[1].startswith("mini_H_L0_R0#0,mini_H_L0_R0,synthetic,H,")
    assert lines[1].endswith(",2000")
    truth = read_segments_truth(manifest)
    assert truth["mini_H_L1_R1#39"] == "H"

    # rerun produces byte-identical data outputs
    before = manifest.read_bytes()
    assert main(args) == 0
    assert manifest.read_bytes() == before
    record = json.loads((out / "run_segment.json").read_text())
    assert str(mini_env / "catalog_small.csv") in record["inputs"]


# --- folds / splits -------------------------------------------------------------------

def test_folds_and_splits(mini_env, tmp_path, capsys):
    plan_path = tmp_path / "plan.csv"
    code = main(
        [
            "folds",
            "--catalog", str(mini_env / "catalog_small.csv"),
            "--rule", "by-load",
            "--out", str(tmp_path),
            "--out-plan", str(plan_path),
        ]
    )
    assert code == 0
    assert "ByLoad plan with K=2 over 640 segments" in capsys.readouterr().out
    plan = load_fold_plan(plan_path)
    assert set(plan.assignment.values()) == {1, 2}

    split_path = tmp_path / "split_r1.csv"
    code = main(
        [
            "splits",
            "--plan", str(plan_path),
            "--round", "1",
            "--out", str(tmp_path),
            "--seed", "3",
        ]
    )
    assert code == 0
    split = load_split(split_path)
    assert split.round == 1
    assert len(split.test) == 320  # one load division
    assert len(split.train) + len(split.val) == 320
    assert split.seed == 3

    assert main(["splits", "--plan", str(plan_path), "--round", "9",
                 "--out", str(tmp_path)]) == 2


def test_folds_by_severity(mini_env, tmp_path, capsys):
    code = main(
        [
            "folds",
            "--catalog", str(mini_env / "catalog_small.csv"),
            "--rule", "by-severity",
            "--out", str(tmp_path),
        ]
    )
    assert code == 0
    assert "BySeverity plan with K=4" in capsys.readouterr().out
    assert load_fold_plan(tmp_path / "plan.csv").rule.kind == "BySeverity"


# --- features / select -----------------------------------------------------------------

def test_features_table(features_csv):
    matrix, labels = read_features(features_csv)
    assert matrix.values.shape == (640, 512)
    assert matrix.feature_names[0] == "f000"
    assert sorted(set(labels)) == ["B", "H", "I", "O"]
    assert np.all(np.isfinite(matrix.values))


def test_select_ranks_features(mini_env, features_csv, tmp_path, capsys):
    out_sel = tmp_path / "selection.json"
    code = main(
        [
            "select",
            "--features", str(features_csv),
            "--top-k", "32",
            "--out", str(tmp_path),
            "--out-selection", str(out_sel),
        ]
    )
    assert code == 0
    assert "top 32 of 512 features selected" in capsys.readouterr().out
    payload = json.loads(out_sel.read_text())
    assert payload["k"] == 32
    assert len(payload["selected"]) == 32
    assert len(payload["scores"]) == 512


def test_select_with_split_restriction(mini_env, features_csv, tmp_path):
    plan_path = tmp_path / "plan.csv"
    main(["folds", "--catalog", str(mini_env / "catalog_small.csv"),
          "--rule", "by-load", "--out", str(tmp_path), "--out-plan", str(plan_path)])
    main(["splits", "--plan", str(plan_path), "--round", "1", "--out", str(tmp_path)])
    code = main(
        [
            "select",
            "--features", str(features_csv),
            "--top-k", "16",
            "--split", str(tmp_path / "split_r1.csv"),
            "--out", str(tmp_path),
        ]
    )
    assert code == 0
    assert json.loads((tmp_path / "selection.json").read_text())["k"] == 16


# --- train / predict / evaluate / report ------------------------------------------------

def test_train_baseline_outputs(trained_run):
    for name in (
        "plan.csv", "segments.csv",
        "split_r1.csv", "split_r2.csv",
        "model_r1.json", "model_r2.json",
        "predictions_r1.csv", "predictions_r2.csv",
        "run_train_baseline.json",
    ):
        assert (trained_run / name).is_file(), name
    header = (trained_run / "predictions_r1.csv").read_text().splitlines()[0]
    assert header == "segment_id,predicted_label,p_B,p_H,p_I,p_O"


def test_predict_reproduces_training_predictions(trained_run, features_csv, tmp_path):
    out_pred = tmp_path / "predictions.csv"
    code = main(
        [
            "predict",
            "--model", str(trained_run / "model_r1.json"),
            "--features", str(features_csv),
            "--split", str(trained_run / "split_r1.csv"),
            "--out", str(tmp_path),
            "--out-predictions", str(out_pred),
        ]
    )
    assert code == 0
    assert out_pred.read_bytes() == (trained_run / "predictions_r1.csv").read_bytes()


def test_evaluate_scores_run_directory(trained_run, capsys):
    assert main(["evaluate", "--dir", str(trained_run)]) == 0
    out = capsys.readouterr().out
    assert re.search(r"balanced accuracy \d\.\d{4} \+/- \d\.\d{4}", out)
    assert (trained_run / "metrics.csv").is_file()
    assert (trained_run / "metrics_folds.csv").is_file()
    text = (trained_run / "metrics.txt").read_text()
    assert "SoftmaxBaseline" in text and "ByLoad" in text
    fold_lines = (trained_run / "metrics_folds.csv").read_text().splitlines()
    assert fold_lines[0] == "round,balanced_accuracy,macro_f1"
    assert len(fold_lines) == 3


def test_report_merges_metrics(trained_run, tmp_path, capsys):
    main(["evaluate", "--dir", str(trained_run)])
    capsys.readouterr()
    out_report = tmp_path / "report.txt"
    code = main(
        [
            "report",
            "--metrics", str(trained_run / "metrics.csv"),
            "--out", str(tmp_path),
            "--out-report", str(out_report),
        ]
    )
    assert code == 0
    text = out_report.read_text()
    assert "SoftmaxBaseline" in text
    assert text.splitlines()[-1].startswith("Std is the sample standard deviation")


def test_evaluate_requires_predictions(tmp_path, capsys):
    (tmp_path / "segments.csv").write_text(
        "segment_id,recording_id,dataset_id,label,sampling_rate_hz,segment_samples\n"
    )
    assert main(["evaluate", "--dir", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("EvalError:")


# --- spectrogram -------------------------------------------------------------------------

def test_spectrogram_renders_pngs(mini_env, tmp_path):
    plan_path = tmp_path / "plan.csv"
    main(["folds", "--catalog", str(mini_env / "catalog_small.csv"),
          "--rule", "by-load", "--out", str(tmp_path), "--out-plan", str(plan_path)])
    out = tmp_path / "spect"
    code = main(
        [
            "spectrogram",
            "--catalog", str(mini_env / "catalog_one.csv"),
            "--out", str(out),
            "--plan", str(plan_path),
        ]
    )
    assert code == 0
    pngs = sorted((out / "images").glob("*.png"))
    assert len(pngs) == 40
    with Image.open(pngs[0]) as im:
        assert im.size == (512, 256)
        assert im.mode == "L"
    lines = (out / "images.csv").read_text().splitlines()
    assert lines[0] == "segment_id,png_path,label,dataset_id,fold"
    assert len(lines) == 41
    first = lines[1].split(",")
    assert first[0] == "mini_H_L0_R0#0"
    assert first[1] == "images/mini_H_L0_R0#0.png"
    assert first[2] == "H"
    assert first[4] == "1"  # fold column filled from the plan

    # idempotence: bytes stable across a rerun
    sample = pngs[0].read_bytes()
    manifest = (out / "images.csv").read_bytes()
    assert main(["spectrogram", "--catalog", str(mini_env / "catalog_one.csv"),
                 "--out", str(out), "--plan", str(plan_path)]) == 0
    assert pngs[0].read_bytes() == sample
    assert (out / "images.csv").read_bytes() == manifest


# --- spectrum ----------------------------------------------------------------------------

def test_spectrum_csv(mini_env, tmp_path, capsys):
    out_spectrum = tmp_path / "spectrum.csv"
    code = main(
        [
            "spectrum",
            "--catalog", str(mini_env / "catalog.csv"),
            "--recording", "mini_H_L0_R0",
            "--frame", "1024",
            "--out", str(tmp_path),
            "--out-spectrum", str(out_spectrum),
        ]
    )
    assert code == 0
    assert "averaged spectrum with 513 bins" in capsys.readouterr().out
    lines = out_spectrum.read_text().splitlines()
    assert lines[0] == "freq_hz,amplitude"
    assert len(lines) == 1 + 513
    freqs = np.array([float(l.split(",")[0]) for l in lines[1:]])
    amps = np.array([float(l.split(",")[1]) for l in lines[1:]])
    # shaft tone at 29.95 Hz -> bin 4 at 7.8125 Hz resolution
    assert int(np.argmax(amps)) == 4
    assert freqs[1] == pytest.approx(8000.0 / 1024.0)

    assert main(["spectrum", "--catalog", str(mini_env / "catalog.csv"),
                 "--recording", "ghost", "--out", str(tmp_path)]) == 2
    capsys.readouterr()


# --- ingest ------------------------------------------------------------------------------

def test_ingest_builds_catalog_from_tree(tmp_path, capsys):
    root = tmp_path / "data"
    sub = root / "drive_end"
    sub.mkdir(parents=True)
    n = 4800
    de = np.arange(n, dtype=np.float64).reshape(n, 1) / n
    fe = np.ones((n, 1))
    rpm = np.array([[1797.0]])
    (sub / "97.mat").write_bytes(
        matwriter.write_mat(
            [("X097_DE_time", de), ("X097_FE_time", fe), ("X097RPM", rpm)]
        )
    )
    (sub / "zz9.mat").write_bytes(matwriter.write_mat([("X099_DE_time", fe)]))
    (root / "105.csv").write_text("\n".join(repr(v / 1200) for v in range(1200)) + "\n")

    out_catalog = tmp_path / "catalog.csv"
    code = main(
        [
            "ingest",
            "--dataset", "cwru",
            "--root", str(root),
            "--out", str(tmp_path),
            "--out-catalog", str(out_catalog),
        ]
    )
    assert code == 0
    captured = capsys.readouterr()
    assert "cataloged 3 recordings from 2 files" in captured.out
    assert "skipping zz9.mat" in captured.err

    catalog = load_catalog(out_catalog)
    ids = sorted(rec.recording_id for rec in catalog.recordings)
    assert ids == ["cwru_105_DE", "cwru_97_DE", "cwru_97_FE"]
    by_id = {rec.recording_id: rec for rec in catalog.recordings}
    assert by_id["cwru_97_DE"].sampling_rate == 48000.0
    assert by_id["cwru_97_DE"].duration == pytest.approx(n / 48000.0)
    assert by_id["cwru_97_DE"].source_file == "drive_end/97.mat"
    assert by_id["cwru_97_FE"].sensor_position == "FE"
    assert by_id["cwru_105_DE"].sampling_rate == 12000.0
    assert by_id["cwru_105_DE"].label.value == "I"


def test_ingest_error_paths(tmp_path, capsys):
    assert main(["ingest", "--dataset", "cwru", "--root", str(tmp_path / "absent"),
                 "--out", str(tmp_path)]) == 2
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["ingest", "--dataset", "cwru", "--root", str(empty),
                 "--out", str(tmp_path)]) == 2
    assert main(["ingest", "--dataset", "nope", "--root", str(empty),
                 "--out", str(tmp_path)]) == 1  # bad choice -> usage error
    capsys.readouterr()


# --- config flow through the CLI ----------------------------------------------------------

def test_config_file_and_flag_precedence(mini_env, tmp_path):
    config = {
        "catalog": str(mini_env / "catalog_small.csv"),
        "output_dir": str(tmp_path / "from_file"),
        "seed": 7,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))

    assert main(["segment", "--config", str(config_path)]) == 0
    assert (tmp_path / "from_file" / "segments.csv").is_file()

    override_dir = tmp_path / "from_flag"
    assert main(["segment", "--config", str(config_path), "--out", str(override_dir)]) == 0
    assert (override_dir / "segments.csv").is_file()
    record = json.loads((override_dir / "run_segment.json").read_text())
    assert record["seed"] == 7  # file seed survives when not overridden
