"""
Pérdidas de la salida: suma de cuadrados (visión) y KL (propiocepción).
"""

import logging
from typing import Tuple

import numpy as np

from network.errors import ConfigurationError

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-15


def sse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """sum (target - pred)^2 y su gradiente respecto a pred"""
    if pred.shape != target.shape:
        raise ConfigurationError(f"sse_loss: formas distintas {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.sum(diff * diff)), 2.0 * diff


def kl_loss(target: np.ndarray, pred: np.ndarray) -> Tuple[float, np.ndarray, bool]:
    """
    sum target * log(target / pred) con 0 log(0/y) = 0.

    Returns:
        pérdida, gradiente respecto a pred y bandera de piso aplicado
    """
    if pred.shape != target.shape:
        raise ConfigurationError(f"kl_loss: formas distintas {pred.shape} vs {target.shape}")
    floored = bool(np.any((pred < PROB_FLOOR) & (target > 0)))
    if floored:
        logger.warning("kl_loss: probabilidad predicha por debajo de %.0e, se aplica el piso", PROB_FLOOR)
    safe = np.maximum(pred, PROB_FLOOR)
    mask = target > 0
    terms = np.zeros_like(target, dtype=float)
    terms[mask] = target[mask] * (np.log(target[mask]) - np.log(safe[mask]))
    grad = np.where(mask, -target / safe, 0.0)
    return float(terms.sum()), grad, floored


def softmax_kl_logit_grad(target: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """
    Gradiente de KL(target || softmax(u)) respecto a u.

    Con grupos objetivo normalizados el término y * sum(target) se reduce a y,
    de modo que la predicción perfecta da exactamente cero.
    """
    return pred - target
