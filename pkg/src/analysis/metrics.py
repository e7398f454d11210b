"""
Métricas de error por paso entre secuencias predichas y observadas.
"""

import numpy as np
import pandas as pd

from data.coding import CodingConfig, decode_joints, normalize_groups
from network.errors import ConfigurationError
from ops.losses import PROB_FLOOR

METRIC_COLUMNS = ["step", "visual_mse", "proprio_kl",
                  "joint_abs_error_left", "joint_abs_error_right", "joint_abs_error_mean"]


def _kl_rows(target: np.ndarray, pred: np.ndarray) -> np.ndarray:
    safe = np.maximum(pred, PROB_FLOOR)
    terms = np.zeros_like(target)
    mask = target > 0
    terms[mask] = target[mask] * (np.log(target[mask]) - np.log(safe[mask]))
    return terms.sum(axis=-1)


def error_metrics(pred_frames: np.ndarray, pred_codes: np.ndarray, target_frames: np.ndarray,
                  target_codes: np.ndarray, coding: CodingConfig) -> pd.DataFrame:
    """
    Tabla por paso con MSE visual por píxel, KL propioceptiva y error absoluto
    de los ángulos decodificados; la última fila ("mean") promedia cada columna.

    Args:
        pred_frames, target_frames: (T, H, W) o (T, 1, H, W)
        pred_codes, target_codes: (T, P)
        coding: código poblacional para decodificar ángulos
    """
    pf = np.asarray(pred_frames, dtype=float)
    tf = np.asarray(target_frames, dtype=float)
    steps = pf.shape[0]
    if tf.shape[0] != steps or len(pred_codes) != steps or len(target_codes) != steps:
        raise ConfigurationError(
            f"error_metrics: largos distintos ({steps}, {tf.shape[0]}, {len(pred_codes)}, {len(target_codes)})")
    pf = pf.reshape(steps, -1)
    tf = tf.reshape(steps, -1)
    if pf.shape != tf.shape:
        raise ConfigurationError(f"error_metrics: cuadros {pf.shape} vs {tf.shape}")

    pc = normalize_groups(pred_codes, coding)
    tc = normalize_groups(target_codes, coding)
    mse = np.mean((pf - tf) ** 2, axis=1)
    kl = _kl_rows(tc, pc)
    joint_err = np.abs(decode_joints(pc, coding) - decode_joints(tc, coding))

    table = pd.DataFrame({
        "step": np.arange(steps).astype(str),
        "visual_mse": mse,
        "proprio_kl": kl,
        "joint_abs_error_left": joint_err[:, 0],
        "joint_abs_error_right": joint_err[:, 1],
        "joint_abs_error_mean": joint_err.mean(axis=1),
    }, columns=METRIC_COLUMNS)
    summary = {"step": "mean"}
    for col in METRIC_COLUMNS[1:]:
        summary[col] = float(table[col].mean())
    return pd.concat([table, pd.DataFrame([summary], columns=METRIC_COLUMNS)], ignore_index=True)


def joint_rmse(pred_codes: np.ndarray, target_joints: np.ndarray, coding: CodingConfig) -> float:
    """RMSE entre los ángulos decodificados de un código y ángulos de referencia"""
    decoded = decode_joints(normalize_groups(pred_codes, coding), coding)
    return float(np.sqrt(np.mean((decoded - np.asarray(target_joints, dtype=float)) ** 2)))
