"""
Corridas de escritorio: 4 primitivas, T = 40, mapas 2/4/6.

Tardan minutos; se ejecutan con `pytest --runslow`.
"""

import numpy as np
import pytest

from analysis.intent import classify_inferred_intent, nearest_labels, reference_states, top_vectors
from analysis.metrics import joint_rmse
from config.networkConfig import HIDDEN_LAYERS, ErsConfig, TrainConfig, load_network_config
from data.coding import decode_joints
from data.gestureSynth import build_dataset, home_io, load_gesture_config, make_test_stream
from inference.errorRegression import prepare_stream, run_ers
from network.dynamics import generate_closed_loop, unroll, zero_state
from ops.losses import kl_loss
from training.trainer import train

pytestmark = pytest.mark.slow

WINDOW = 30
JOINT_RANGE = 2.0


@pytest.fixture(scope="module")
def desk_run():
    gestures = load_gesture_config()
    dataset = build_dataset(seed=0, steps=gestures.desk_steps, config=gestures, subset=gestures.desk_subset)
    result = train(dataset, TrainConfig(epochs=3000, learning_rate=1e-3), load_network_config("desk"),
                   coding=dataset.coding, progress=False)
    stream = make_test_stream(dataset, gestures.desk_subset, jitter=0.02, seed=0)
    return gestures, dataset, result, stream


@pytest.fixture(scope="module")
def visual_ers(desk_run):
    _, _, result, stream = desk_run
    return run_ers(result.checkpoint.params, stream.frames, stream.codes,
                   ErsConfig(window=WINDOW, iterations=50, learning_rate=0.1, modality="visual"),
                   progress=False)


@pytest.fixture(scope="module")
def entrainment_baseline(desk_run):
    _, _, result, stream = desk_run
    return run_ers(result.checkpoint.params, stream.frames, stream.codes,
                   ErsConfig(window=WINDOW, iterations=0), progress=False)


def _visual_mse(v_out, frames):
    # la salida del paso t predice la observación t + 1
    n = len(v_out) - WINDOW - 1
    diff = v_out[WINDOW:-1].reshape(n, -1) - frames[WINDOW + 1:].reshape(n, -1)
    return float(np.mean(diff ** 2))


def _proprio_kl(p_out, codes):
    total, _, _ = kl_loss(codes[WINDOW + 1:][None], p_out[WINDOW:-1][None])
    return total / (len(p_out) - WINDOW - 1)


# ==========================
# Entrenamiento y simulación mental
# ==========================
def test_training_reduces_loss_tenfold(desk_run):
    _, _, result, _ = desk_run
    history = result.history
    assert history["E"].iloc[-1] < 0.1 * history["E"].iloc[0]


def test_closed_loop_regeneration(desk_run):
    gestures, dataset, result, _ = desk_run
    params = result.checkpoint.params
    frame, code = home_io(gestures)
    generated = {}
    for index, seq in enumerate(dataset):
        v_out, p_out = generate_closed_loop(params, params.initial_state([index]), (frame, code), seq.steps - 1)
        assert joint_rmse(p_out[0], seq.joints[1:], dataset.coding) < 0.05 * JOINT_RANGE
        mse = np.mean((v_out[0].reshape(seq.steps - 1, -1) - seq.frames[1:].reshape(seq.steps - 1, -1)) ** 2)
        assert mse < 0.01
        generated[seq.primitive_id] = decode_joints(p_out[0], dataset.coding)

    ids = [seq.primitive_id for seq in dataset]
    library = np.stack([seq.joints[1:].astype(float).ravel() for seq in dataset])
    for pid, joints in generated.items():
        match = nearest_labels(joints.ravel()[None], ids, library)[0]
        assert match == pid


# ==========================
# Regresión del error
# ==========================
def test_visual_ers_halves_the_visual_error(desk_run, visual_ers, entrainment_baseline):
    _, _, _, stream = desk_run
    frames = stream.frames.astype(float)
    assert _visual_mse(visual_ers.v_out, frames) <= 0.5 * _visual_mse(entrainment_baseline.v_out, frames)


def test_proprioceptive_ers_halves_the_kl(desk_run):
    _, _, result, stream = desk_run
    params = result.checkpoint.params
    _, codes = prepare_stream(stream.frames, stream.codes, params)
    regressed = run_ers(params, stream.frames, stream.codes,
                        ErsConfig(window=WINDOW, iterations=50, learning_rate=0.1, modality="proprioceptive"),
                        progress=False)
    baseline = run_ers(params, stream.frames, stream.codes,
                       ErsConfig(window=WINDOW, iterations=0, modality="proprioceptive"), progress=False)
    assert _proprio_kl(regressed.p_out, codes) <= 0.5 * _proprio_kl(baseline.p_out, codes)


def test_visual_ers_recalls_the_joints(desk_run, visual_ers):
    _, dataset, _, stream = desk_run
    rmse = joint_rmse(visual_ers.p_out[WINDOW:-1], stream.joints[WINDOW + 1:], dataset.coding)
    assert rmse < 0.1 * JOINT_RANGE


def test_inferred_intent_matches_the_schedule(desk_run, visual_ers):
    _, _, result, stream = desk_run
    ids, refs = reference_states(result.checkpoint.params)
    inferred = top_vectors(visual_ers.window_states)
    intent = classify_inferred_intent(inferred, ids, refs, stream.schedule, window=WINDOW)
    assert intent.accuracy >= 0.7

    table = intent.table[intent.table["t"] >= WINDOW]
    for pid in ids:
        rows = table.index[table["truth"] == pid]
        if len(rows) == 0:
            continue
        centroid = inferred[rows].mean(axis=0)
        assert nearest_labels(centroid[None], ids, refs)[0] == pid


def test_trained_model_output_is_a_fixpoint(desk_run):
    gestures, _, result, _ = desk_run
    params = result.checkpoint.params
    frame, code = home_io(gestures)
    roll = unroll(params, zero_state(params), (frame[None], code), 40)
    v_out, p_out = roll.outputs()
    frames = np.concatenate([frame[None, None], v_out[0]])
    codes = np.concatenate([code[None], p_out[0]])
    ers = run_ers(params, frames, codes, ErsConfig(window=WINDOW, iterations=50, modality="visual"),
                  progress=False)
    for t in range(len(frames)):
        s0 = max(0, t - WINDOW)
        for name in HIDDEN_LAYERS:
            assert np.abs(ers.window_states[name][t] - roll.states[s0].u[name][0]).max() < 1e-6
