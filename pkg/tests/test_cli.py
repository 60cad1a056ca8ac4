"""Command-line entry points end to end (simulated oracle paths)."""

import json

import pytest

from activereid.cli import main
from activereid.config import load_config
from activereid.dataset import load_manifest


@pytest.fixture
def manifest_path(tmp_path):
    path = tmp_path / "data.jsonl"
    rc = main([
        "generate", "--out", str(path),
        "--identities", "5", "--cameras", "2",
        "--tracklets-per-id-per-cam", "2", "--images-per-tracklet", "3",
        "--dimension", "8", "--cross-camera-shift-std", "0.8", "--seed", "1",
    ])
    assert rc == 0
    return path


def test_generate_writes_valid_manifest(manifest_path):
    m = load_manifest(manifest_path)
    assert m.num_tracklets == 20
    assert m.camera_count == 2
    assert m.has_identities()


def test_run_and_replay(tmp_path, manifest_path, capsys):
    out = tmp_path / "run"
    rc = main([
        "run", "--manifest", str(manifest_path), "--seed", "1", "--out-dir", str(out),
        "--s1", "6", "--s2", "3", "--s3", "2", "--s4", "8", "--t0", "3",
        "--max-iterations", "40", "--stop-at-gained", "1.0",
    ])
    assert rc == 0
    assert "gained_TP_ratio=1.0" in capsys.readouterr().out
    assert (out / "ledger.jsonl").exists()
    assert (out / "metrics.jsonl").exists()
    cfg = load_config(out / "config.txt")
    assert cfg.s1 == 6 and cfg.seed == 1

    rc = main([
        "replay", "--manifest", str(manifest_path),
        "--ledger", str(out / "ledger.jsonl"), "--config", str(out / "config.txt"),
    ])
    assert rc == 0
    assert "gained=1.0" in capsys.readouterr().out


def test_eval_outputs_metrics(manifest_path, capsys):
    assert main(["eval", "--manifest", str(manifest_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) == {"cmc", "mAP"}
    assert 0 <= payload["mAP"] <= 1


def test_estimate_tpa(manifest_path, capsys):
    assert main(["estimate-tpa", "--manifest", str(manifest_path), "--runs", "3"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("T_pa = ")
    assert float(out.split("=")[1]) > 0


def test_compare_exports_curves(tmp_path, manifest_path, capsys):
    out = tmp_path / "cmp"
    rc = main([
        "compare", "--manifest", str(manifest_path), "--seed", "1",
        "--out-dir", str(out), "--strategies", "view_aware_resample,random",
        "--seeds", "1", "--target", "0.9",
        "--s1", "6", "--s2", "3", "--s3", "2", "--s4", "8", "--t0", "3",
        "--max-iterations", "40",
    ])
    assert rc == 0
    text = capsys.readouterr().out
    assert "view_aware_resample" in text and "random" in text
    summary = json.loads((out / "compare_summary.json").read_text())
    assert set(summary) == {"view_aware_resample", "random"}
    curves = (out / "curves.csv").read_text().splitlines()
    assert curves[0].startswith("strategy,seed,iteration")
    assert len(curves) > 2
