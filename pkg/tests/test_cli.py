"""CLI surface tests at desk scale (fast paths; the full pipeline run lives
in the acceptance suite)."""

import json

import numpy as np
import pytest

from emocert.cli import main
from emocert.data.manifest import load_manifest
from emocert.metrics import read_records


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def workspace(tmp_path):
    images = tmp_path / "images"
    manifest = tmp_path / "fixture.jsonl"
    code = run(
        "fixture", "gen", "--out-dir", images, "--manifest", manifest,
        "--n-per-class", 6, "--seed", 0,
    )
    assert code == 0
    return tmp_path, images, manifest


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        run("dataset", "analyze", "--wat", "x")
    assert err.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as err:
        run("frobnicate")
    assert err.value.code == 2


def test_missing_file_is_operation_failure(tmp_path, capsys):
    assert run("dataset", "analyze", "--manifest", tmp_path / "nope.jsonl") == 1
    assert "error:" in capsys.readouterr().err


def test_fixture_gen_and_analyze(workspace, capsys):
    tmp, images, manifest = workspace
    out = tmp / "report.json"
    assert run("dataset", "analyze", "--manifest", manifest, "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["total_samples"] == 24
    assert report["counts"]["emotion"]["anger"] == 6


def test_split_then_augment_then_rebalance(workspace):
    tmp, images, manifest = workspace
    split = tmp / "split.jsonl"
    assert run("dataset", "split", "--manifest", manifest, "--fractions", "4/6,1/6,1/6",
               "--seed", 1, "--out", split) == 0
    m = load_manifest(split)
    counts = {}
    for s in m.samples:
        counts[s.split] = counts.get(s.split, 0) + 1
    assert counts == {"train": 16, "val": 4, "test": 4}

    augmented = tmp / "augmented.jsonl"
    assert run("dataset", "augment", "--manifest", split, "--images-dir", images,
               "--seed", 0, "--out", augmented) == 0
    assert len(load_manifest(augmented)) == 264

    rebalanced = tmp / "rebalanced.jsonl"
    assert run("dataset", "rebalance", "--manifest", augmented, "--emotion", "calm",
               "--keep-fraction", "0.5", "--seed", 2, "--out", rebalanced) == 0
    m = load_manifest(rebalanced)
    assert sum(1 for s in m.samples if s.emotion == "calm" and s.is_original()) == 3


def test_train_evaluate_metrics_certify_roundtrip(workspace, capsys):
    tmp, images, manifest = workspace
    split = tmp / "split.jsonl"
    run("dataset", "split", "--manifest", manifest, "--fractions", "4/6,1/6,1/6",
        "--seed", 0, "--out", split)

    model = tmp / "model.emoc"
    history = tmp / "history.csv"
    assert run("train", "--arch", "baseline", "--manifest", split, "--images-dir", images,
               "--model", model, "--history", history, "--seed", 0,
               "--max-epochs", 2, "--batch-size", 8) == 0
    assert model.exists()
    assert history.read_text().startswith("epoch,train_loss,train_acc,val_loss,val_acc,lr")

    preds = tmp / "preds.jsonl"
    assert run("evaluate", "--model", model, "--manifest", split, "--images-dir", images,
               "--split", "test", "--out", preds) == 0
    records = read_records(preds)
    assert len(records) == 4

    metrics = tmp / "metrics.json"
    confusion_csv = tmp / "confusion.csv"
    assert run("metrics", "--predictions", preds, "--out", metrics,
               "--history", history, "--min-group-n", 1,
               "--confusion-csv", confusion_csv) == 0
    doc = json.loads(metrics.read_text())
    assert doc["schema"] == "metrics/1"
    assert "accuracy" in doc["metrics"]
    assert doc["inputs"]["predictions"].startswith("sha256:")
    assert confusion_csv.read_text().startswith("true\\predicted,anger,fear,calm,surprise")

    report = tmp / "report.json"
    code = run("certify", "--metrics", metrics, "--out", report,
               "--pin-timestamp", "2026-01-01T00:00:00Z")
    assert code in (0, 1)  # tiny random-ish model may fail thresholds
    doc = json.loads(report.read_text())
    assert doc["overall"] in ("pass", "fail")
    assert (code == 0) == (doc["overall"] == "pass")
    assert doc["generated_at"] == "2026-01-01T00:00:00Z"


def test_certify_with_failed_reliability_exits_1(tmp_path):
    # hand-crafted baseline-style bundle: three reliability failures
    bundle = {
        "accuracy": 0.5388,
        "macro_f1": 0.52,
        "mean_confidence": 0.27,
        "mean_entropy": 1.38,
        "confusion": [[1, 0, 0, 0]] * 4,
        "per_group": {},
        "per_augmentation": {"none": 0.5388},
        "record_count": 100,
        "train_accuracy": 0.55,
        "train_test_gap": 0.0112,
    }
    metrics = tmp_path / "metrics.json"
    metrics.write_text(json.dumps({"schema": "metrics/1", "metrics": bundle}))
    report = tmp_path / "report.json"
    assert run("certify", "--metrics", metrics, "--out", report) == 1
    doc = json.loads(report.read_text())
    assert doc["dimensions"]["reliability"] == "fail"


def test_certify_strict_profile_errors_exit_1(tmp_path, capsys):
    metrics = tmp_path / "metrics.json"
    metrics.write_text(json.dumps({"metrics": {
        "accuracy": 0.9, "macro_f1": 0.9, "mean_confidence": 0.9, "mean_entropy": 0.1,
        "confusion": [[1, 0, 0, 0]] * 4, "per_group": {}, "per_augmentation": {},
        "record_count": 1, "train_accuracy": 0.9, "train_test_gap": 0.0,
    }}))
    profile = tmp_path / "profile.json"
    profile.write_text(json.dumps({"reliability": {"unknown_criterion": 1}}))
    assert run("certify", "--metrics", metrics, "--profile", profile) == 1
    assert "unknown key" in capsys.readouterr().err


def test_human_readable_report_to_stdout(tmp_path, capsys):
    metrics = tmp_path / "metrics.json"
    metrics.write_text(json.dumps({"metrics": {
        "accuracy": 0.9, "macro_f1": 0.9, "mean_confidence": 0.9, "mean_entropy": 0.1,
        "confusion": [[1, 0, 0, 0]] * 4,
        "per_group": {
            attr: {"attribute": attr, "min_group_n": 30, "max_gap": 0.01,
                   "groups": {"a": {"accuracy": 0.9, "count": 50, "included": True}}}
            for attr in ("gender", "race", "age_group")
        },
        "per_augmentation": {}, "record_count": 100,
        "train_accuracy": 0.95, "train_test_gap": 0.05,
    }}))
    assert run("certify", "--metrics", metrics, "--format", "human_readable",
               "--pin-timestamp", "t0") == 0
    out = capsys.readouterr().out
    assert "CONFORMITY REPORT" in out
    assert "overall: PASS" in out


def test_version_flag():
    with pytest.raises(SystemExit) as err:
        run("--version")
    assert err.value.code == 0
