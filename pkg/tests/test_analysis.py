"""
Análisis: PCA, métricas de error, intención inferida, exportación PGM y gráficos.
"""

import warnings

import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest
from PIL import Image

from analysis.frames import dequantize, dump_frames, quantize, read_frame
from analysis.intent import (classify_inferred_intent, nearest_labels, reference_states,
                             top_vectors)
from analysis.metrics import METRIC_COLUMNS, error_metrics, joint_rmse
from analysis.pca import pca, project_activations, project_initial_states
from data.coding import CodingConfig, encode_joints
from network.errors import ConfigurationError
from visualization.plots import plot_joint_trajectories, plot_loss_curve, plot_pca_scatter


# ==========================
# PCA
# ==========================
def test_rank_one_data_is_fully_explained(rng):
    direction = np.array([3.0, -4.0, 0.0]) / 5.0
    data = rng.normal(size=(20, 1)) * direction + np.array([1.0, 2.0, 3.0])
    result = pca(data, 1)
    npt.assert_allclose(result.explained_ratio, [1.0], atol=1e-12)
    npt.assert_allclose(np.abs(result.components[0]), np.abs(direction), atol=1e-12)
    rebuilt = result.projections @ result.components + result.mean
    npt.assert_allclose(rebuilt, data, atol=1e-12)


def test_components_match_covariance_eigenvectors(rng):
    data = rng.normal(size=(50, 4)) @ np.diag([3.0, 2.0, 1.0, 0.5])
    result = pca(data, 2)
    cov = np.cov(data, rowvar=False)
    values, vectors = np.linalg.eigh(cov)
    for i in range(2):
        v = vectors[:, -(i + 1)]
        npt.assert_allclose(np.abs(result.components[i] @ v), 1.0, atol=1e-10)
    npt.assert_allclose(result.explained_ratio, values[::-1][:2] / values.sum(), rtol=1e-10)
    npt.assert_allclose(result.components @ result.components.T, np.eye(2), atol=1e-12)


def test_sign_convention_makes_largest_entry_positive(rng):
    data = rng.normal(size=(30, 5))
    result = pca(data, 3)
    flipped = pca(-data, 3)
    for row in result.components:
        assert row[np.argmax(np.abs(row))] > 0
    npt.assert_allclose(flipped.components, result.components, atol=1e-10)


def test_pca_rejects_bad_inputs():
    with pytest.raises(ConfigurationError):
        pca(np.zeros((1, 3)), 1)
    with pytest.raises(ConfigurationError):
        pca(np.zeros((5, 3)), 4)


def test_initial_state_projection_rows(tiny_params, rng, tmp_path):
    for layer in ("vs", "ps"):
        name = f"init.{layer}"
        tiny_params.tensors[name] = rng.normal(size=tiny_params.tensors[name].shape)
    frames = project_initial_states(tiny_params, out_dir=tmp_path)
    for layer in ("vs", "ps"):
        df = pd.read_csv(tmp_path / f"initial_states_{layer}.csv")
        assert df["primitive"].tolist() == [0, 1]
        assert {"pc1", "pc2", "ratio_1", "ratio_2"} <= set(df.columns)
        # dos puntos: una sola dirección de varianza
        assert df["ratio_1"].iloc[0] == pytest.approx(1.0)
        npt.assert_allclose(df["pc1"].to_numpy(), frames[layer]["pc1"].to_numpy())
        assert df["pc1"].iloc[0] == pytest.approx(-df["pc1"].iloc[1])


def test_activation_projection_fit_modes(rng, tmp_path):
    train = {"vs": rng.normal(size=(12, 6))}
    test = {"vs": rng.normal(size=(5, 6)) + 10.0}
    only_train = project_activations(train, test, layers=("vs",), fit="train",
                                     train_labels=[0] * 12, out_dir=tmp_path)["vs"]
    joint = project_activations(train, test, layers=("vs",), fit="joint")["vs"]
    assert only_train["source"].tolist() == ["train"] * 12 + ["test"] * 5
    assert only_train["label"].tolist() == [0] * 12 + [-1] * 5
    npt.assert_allclose(only_train.loc[only_train["source"] == "train", "pc1"].mean(), 0.0, atol=1e-12)
    # con la base conjunta el desplazamiento de la prueba domina la primera componente
    gap = joint.groupby("source")["pc1"].mean()
    assert abs(gap["test"] - gap["train"]) > 10.0
    assert (tmp_path / "activations_vs.csv").exists()
    with pytest.raises(ConfigurationError):
        project_activations(train, test, layers=("vs",), fit="both")


# ==========================
# Métricas
# ==========================
def test_identical_sequences_have_zero_error(rng):
    coding = CodingConfig()
    frames = rng.uniform(-1, 1, size=(6, 4, 5))
    codes = encode_joints(rng.uniform(-0.5, 0.5, size=(6, 2)), coding)
    table = error_metrics(frames, codes, frames[:, None], codes, coding)
    assert list(table.columns) == METRIC_COLUMNS
    assert len(table) == 7
    assert table["step"].iloc[-1] == "mean"
    for col in METRIC_COLUMNS[1:]:
        npt.assert_allclose(table[col].to_numpy(dtype=float), 0.0, atol=1e-12)


def test_metric_values_and_mean_row(rng):
    coding = CodingConfig()
    target = np.zeros((2, 3, 3))
    pred = np.stack([np.full((3, 3), 0.5), np.full((3, 3), -1.0)])
    codes = encode_joints(np.zeros((2, 2)), coding)
    other = encode_joints(np.full((2, 2), 0.4), coding)
    table = error_metrics(pred, other, target, codes, coding)
    npt.assert_allclose(table["visual_mse"].to_numpy(dtype=float), [0.25, 1.0, 0.625])
    assert np.all(table["proprio_kl"].iloc[:2] > 0)
    npt.assert_allclose(table["joint_abs_error_left"].iloc[:2].to_numpy(dtype=float), 0.4, atol=2e-3)
    assert joint_rmse(other, np.full((2, 2), 0.4), coding) < 2e-3


def test_metric_length_mismatch():
    coding = CodingConfig()
    codes = encode_joints(np.zeros((3, 2)), coding)
    with pytest.raises(ConfigurationError):
        error_metrics(np.zeros((3, 2, 2)), codes, np.zeros((2, 2, 2)), codes[:2], coding)


# ==========================
# Intención inferida
# ==========================
def test_ties_go_to_the_lowest_primitive_id():
    references = np.array([[1.0, 0.0], [-1.0, 0.0]])
    labels = nearest_labels(np.array([[0.0, 0.0], [0.9, 0.0]]), [13, 4], references)
    npt.assert_array_equal(labels, [4, 13])


def test_intent_accuracy_after_burn_in():
    ids = [0, 9]
    references = np.array([[0.0, 0.0], [5.0, 5.0]])
    schedule = np.array([0] * 6 + [9] * 6)
    window = 2
    # estados que siguen al inicio de la ventana
    truth = schedule[np.maximum(0, np.arange(12) - window)]
    inferred = references[[ids.index(p) for p in truth]] + 0.1
    result = classify_inferred_intent(inferred, ids, references, schedule, window=window)
    assert result.burn_in == window
    assert result.accuracy == pytest.approx(1.0)
    npt.assert_array_equal(result.table["truth"], truth)

    wrong = inferred.copy()
    wrong[-3:] = references[0]
    result = classify_inferred_intent(wrong, ids, references, schedule, window=window, burn_in=6)
    assert result.accuracy == pytest.approx(0.5)


def test_intent_without_schedule_has_no_accuracy(tiny_params):
    ids, refs = reference_states(tiny_params)
    assert ids == [0, 1]
    result = classify_inferred_intent(refs, ids, refs)
    assert np.isnan(result.accuracy)
    assert "truth" not in result.table.columns


def test_intent_input_errors():
    with pytest.raises(ConfigurationError):
        nearest_labels(np.zeros((2, 3)), [], np.zeros((0, 3)))
    with pytest.raises(ConfigurationError):
        nearest_labels(np.zeros((2, 3)), [0], np.zeros((1, 4)))
    with pytest.raises(ConfigurationError):
        classify_inferred_intent(np.zeros((3, 2)), [0], np.zeros((1, 2)), schedule=np.zeros(4))


def test_top_vectors_concatenate_layers(rng):
    states = {"vs": rng.normal(size=(4, 2, 3, 3)), "ps": rng.normal(size=(4, 5))}
    matrix = top_vectors(states)
    assert matrix.shape == (4, 23)
    npt.assert_array_equal(matrix[:, 18:], states["ps"])


# ==========================
# Cuadros PGM
# ==========================
def test_quantization_endpoints():
    npt.assert_array_equal(quantize(np.array([-1.0, 0.0, 1.0, 2.0, -3.0])), [0, 128, 255, 255, 0])
    npt.assert_allclose(dequantize(np.array([0, 255])), [-1.0, 1.0])


def test_dump_and_read_frames(rng, tmp_path):
    frames = rng.uniform(-1, 1, size=(3, 1, 6, 8))
    paths = dump_frames(frames, tmp_path / "frames")
    assert [p.name for p in paths] == ["frame_0000.pgm", "frame_0001.pgm", "frame_0002.pgm"]
    assert paths[0].read_bytes().startswith(b"P5")
    back = read_frame(paths[1])
    assert back.shape == (6, 8)
    assert np.abs(back - frames[1, 0]).max() <= 1.0 / 127.5 / 2.0 + 1e-12


def test_frames_are_written_as_8_bit_gray_without_warnings(rng, tmp_path):
    frames = rng.uniform(-1, 1, size=(2, 5, 7))
    with warnings.catch_warnings():
        warnings.simplefilter("error", DeprecationWarning)
        paths = dump_frames(frames, tmp_path)
    with Image.open(paths[0]) as img:
        assert img.mode == "L"
        assert img.size == (7, 5)
        npt.assert_array_equal(np.array(img), quantize(frames[0]))
    assert paths[0].read_bytes().startswith(b"P5\n7 5\n255\n")


# ==========================
# Gráficos
# ==========================
def test_plots_are_written(rng, tmp_path):
    history = pd.DataFrame({"epoch": [0, 1, 2], "E": [3.0, 2.0, 1.0],
                            "E_V": [2.0, 1.5, 0.5], "E_P": [1.0, 0.5, 0.5]})
    assert plot_loss_curve(history, tmp_path / "loss.png").exists()
    joints = rng.uniform(-0.4, 0.4, size=(10, 2))
    assert plot_joint_trajectories(joints, tmp_path / "joints.png", target=joints, title="p0").exists()
    scatter = pd.DataFrame({"pc1": [0.0, 1.0], "pc2": [1.0, 0.0], "primitive": [0, 4]})
    assert plot_pca_scatter(scatter, tmp_path / "pca.png").exists()


def test_classifier_is_permutation_stable(rng):
    references = rng.normal(size=(4, 3))
    ids = [0, 4, 9, 13]
    inferred = rng.normal(size=(10, 3))
    order = [2, 0, 3, 1]
    a = nearest_labels(inferred, ids, references)
    b = nearest_labels(inferred, [ids[i] for i in order], references[order])
    npt.assert_array_equal(a, b)
