"""
Subcomandos de la CLI de punta a punta sobre el preset diminuto.
"""

import numpy as np
import pandas as pd
import pytest

from cli.commands import main, resolve_subset
from data.datasetIO import load_dataset
from data.gestureSynth import load_gesture_config
from network.checkpoint import load_checkpoint
from network.errors import ConfigurationError


@pytest.fixture
def workspace(tmp_path):
    """Dataset de dos primitivas, flujo de prueba y checkpoint sin entrenar"""
    data = tmp_path / "train.pvmd"
    stream = tmp_path / "stream.pvmd"
    assert main(["synth", "--out", str(data), "--preset", "tiny", "--subset", "2", "--steps", "4"]) == 0
    assert main(["synth", "--out", str(stream), "--preset", "tiny", "--subset", "2", "--steps", "4",
                 "--stream", "4,0"]) == 0
    assert main(["train", "--data", str(data), "--preset", "tiny", "--epochs", "0",
                 "--out", str(tmp_path / "train"), "--quiet"]) == 0
    return {"root": tmp_path, "data": data, "stream": stream,
            "ckpt": tmp_path / "train" / "checkpoint.pvmd"}


# ==========================
# synth
# ==========================
def test_synth_defaults_to_the_full_taxonomy(tmp_path):
    out = tmp_path / "all.pvmd"
    assert main(["synth", "--out", str(out), "--steps", "3"]) == 0
    dataset = load_dataset(out)
    assert len(dataset) == 16
    assert (dataset.image_height, dataset.image_width) == (48, 64)
    assert dataset.sequences[0].steps == 3


def test_synth_subset_and_reproducibility(tmp_path):
    a, b = tmp_path / "a.pvmd", tmp_path / "b.pvmd"
    for path in (a, b):
        assert main(["synth", "--out", str(path), "--steps", "3", "--subset", "4", "--seed", "9"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert [s.primitive_id for s in load_dataset(a)] == [0, 4, 9, 13]


def test_resolve_subset_forms():
    gestures = load_gesture_config()
    assert resolve_subset(None, gestures) is None
    assert resolve_subset("desk", gestures) == [0, 4, 9, 13]
    assert resolve_subset("2,7", gestures) == [2, 7]
    assert resolve_subset("6", gestures) == [0, 4, 9, 13, 1, 2]
    for bad in ("0", "17", "muchas"):
        with pytest.raises(ConfigurationError):
            resolve_subset(bad, gestures)


def test_synth_stream_carries_the_schedule(workspace):
    stream = load_dataset(workspace["stream"])
    assert len(stream) == 1
    seq = stream.sequences[0]
    assert seq.primitive_id == -1
    assert seq.schedule.tolist() == [4] * 4 + [0] * 4


# ==========================
# train / simulate
# ==========================
def test_train_with_zero_epochs(workspace):
    history = pd.read_csv(workspace["root"] / "train" / "loss.csv")
    assert len(history) == 1
    ckpt = load_checkpoint(workspace["ckpt"])
    assert ckpt.epoch == 0
    assert ckpt.params.sequence_ids == [0, 4]
    assert ckpt.coding is not None


def test_train_is_byte_reproducible_with_default_settings(workspace, monkeypatch):
    monkeypatch.delenv("VMI_RECORD_WALL_TIME")
    root = workspace["root"]
    for run in ("a", "b"):
        assert main(["train", "--data", str(workspace["data"]), "--preset", "tiny", "--epochs", "3",
                     "--seed", "7", "--out", str(root / run), "--quiet"]) == 0
    for name in ("loss.csv", "checkpoint.pvmd"):
        assert (root / "a" / name).read_bytes() == (root / "b" / name).read_bytes()
    assert (pd.read_csv(root / "a" / "loss.csv")["wall_seconds"] == 0.0).all()


def test_simulate_writes_one_directory_per_primitive(workspace):
    out = workspace["root"] / "sim"
    assert main(["simulate", "--ckpt", str(workspace["ckpt"]), "--steps", "1", "--out", str(out)]) == 0
    for pid in (0, 4):
        table = pd.read_csv(out / f"primitive_{pid:02d}" / "outputs.csv")
        assert len(table) == 1
        assert list(table.columns[:3]) == ["step", "joint_left", "joint_right"]
        assert (out / f"primitive_{pid:02d}" / "frames" / "frame_0000.pgm").exists()
    assert main(["simulate", "--ckpt", str(workspace["ckpt"]), "--primitive", "13", "--out", str(out)]) == 2


# ==========================
# entrain / ers
# ==========================
def test_ers_without_iterations_matches_entrainment(workspace):
    root = workspace["root"]
    assert main(["entrain", "--ckpt", str(workspace["ckpt"]), "--data", str(workspace["stream"]),
                 "--modality", "vision", "--out", str(root / "entrain")]) == 0
    assert main(["ers", "--ckpt", str(workspace["ckpt"]), "--stream", str(workspace["stream"]),
                 "--modality", "visual", "--iters", "0", "--out", str(root / "ers"), "--quiet"]) == 0
    assert (root / "entrain" / "outputs.csv").read_bytes() == (root / "ers" / "outputs.csv").read_bytes()
    frames = sorted((root / "entrain" / "frames").glob("*.pgm"))
    assert len(frames) == 8
    for path in frames:
        assert path.read_bytes() == (root / "ers" / "frames" / path.name).read_bytes()
    for name in ("trace.csv", "states.f32", "schedule.csv"):
        assert (root / "ers" / name).exists()


def test_ers_then_intent_and_metrics(workspace):
    root = workspace["root"]
    assert main(["ers", "--ckpt", str(workspace["ckpt"]), "--stream", str(workspace["stream"]),
                 "--window", "2", "--iters", "2", "--out", str(root / "ers"), "--quiet"]) == 0
    trace = pd.read_csv(root / "ers" / "trace.csv")
    assert len(trace) == 8
    assert main(["analyze", "--mode", "intent", "--ckpt", str(workspace["ckpt"]), "--trace", str(root / "ers"),
                 "--data", str(workspace["stream"]), "--window", "2", "--out", str(root / "intent")]) == 0
    intent = pd.read_csv(root / "intent" / "intent.csv")
    assert len(intent) == 8
    assert set(intent["predicted"]) <= {0, 4}
    assert main(["analyze", "--mode", "metrics", "--trace", str(root / "ers"), "--data", str(workspace["stream"]),
                 "--out", str(root / "metrics")]) == 0
    metrics = pd.read_csv(root / "metrics" / "metrics.csv")
    assert len(metrics) == 8
    assert metrics["step"].iloc[-1] == "mean"


def test_ers_is_byte_reproducible(workspace):
    root = workspace["root"]
    for run in ("a", "b"):
        assert main(["ers", "--ckpt", str(workspace["ckpt"]), "--stream", str(workspace["stream"]),
                     "--window", "3", "--iters", "3", "--modality", "both", "--out", str(root / run),
                     "--quiet"]) == 0
    for name in ("outputs.csv", "trace.csv", "states.f32"):
        assert (root / "a" / name).read_bytes() == (root / "b" / name).read_bytes()


def test_analyze_pca_and_activations(workspace):
    root = workspace["root"]
    assert main(["analyze", "--mode", "pca", "--ckpt", str(workspace["ckpt"]), "--out", str(root / "pca")]) == 0
    assert (root / "pca" / "initial_states_vs.csv").exists()
    assert main(["analyze", "--mode", "activations", "--ckpt", str(workspace["ckpt"]),
                 "--data", str(workspace["stream"]), "--fit", "joint", "--out", str(root / "acts")]) == 0
    table = pd.read_csv(root / "acts" / "activations_pf.csv")
    assert (table["source"] == "train").sum() == 2 * 8
    assert (table["source"] == "test").sum() == 8


# ==========================
# gradcheck y códigos de salida
# ==========================
def test_gradcheck_passes(tmp_path):
    out = tmp_path / "grad.csv"
    assert main(["gradcheck", "--steps", "3", "--out", str(out)]) == 0
    table = pd.read_csv(out)
    assert np.all(table["rel_error"] < 1e-3)


def test_unknown_analyze_mode_is_a_usage_error():
    assert main(["analyze", "--mode", "tsne"]) == 2
    assert main([]) == 2


def test_missing_checkpoint_for_pca_is_a_usage_error(tmp_path):
    assert main(["analyze", "--mode", "pca", "--out", str(tmp_path / "x")]) == 2


def test_unwritable_output_is_a_usage_error(tmp_path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("no soy un directorio")
    assert main(["synth", "--out", str(blocker / "sub" / "data.pvmd"), "--steps", "2"]) == 2


def test_corrupt_dataset_is_an_io_error(tmp_path):
    bad = tmp_path / "bad.pvmd"
    bad.write_bytes(b"PVMD-DS" + bytes(64))
    assert main(["train", "--data", str(bad), "--preset", "tiny", "--epochs", "0",
                 "--out", str(tmp_path / "out"), "--quiet"]) == 4


def test_invalid_hyperparameters_are_usage_errors(workspace):
    assert main(["ers", "--ckpt", str(workspace["ckpt"]), "--stream", str(workspace["stream"]),
                 "--window", "0", "--out", str(workspace["root"] / "bad"), "--quiet"]) == 2
