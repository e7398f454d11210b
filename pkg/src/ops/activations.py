"""
Funciones de activación y sus derivadas.
"""

from typing import Sequence

import numpy as np

from network.errors import ConfigurationError

# tanh recomendada para unidades de contexto: 1.7159 * tanh(2/3 u)
SCALE = 1.7159
SLOPE = 2.0 / 3.0


def scaled_tanh(u: np.ndarray) -> np.ndarray:
    return SCALE * np.tanh(SLOPE * u)


def scaled_tanh_grad(u: np.ndarray) -> np.ndarray:
    t = np.tanh(SLOPE * u)
    return SCALE * SLOPE * (1.0 - t * t)


def out_tanh(u: np.ndarray) -> np.ndarray:
    return np.tanh(u)


def out_tanh_grad_from_output(v: np.ndarray) -> np.ndarray:
    return 1.0 - v * v


def _group_slices(total: int, groups: Sequence[int]):
    if any(g <= 0 for g in groups):
        raise ConfigurationError(f"softmax_group: grupo vacío en la partición {list(groups)}")
    if sum(groups) != total:
        raise ConfigurationError(f"softmax_group: la partición {list(groups)} no cubre {total} unidades")
    start = 0
    for size in groups:
        yield slice(start, start + size)
        start += size


def softmax_group(u: np.ndarray, groups: Sequence[int]) -> np.ndarray:
    """Softmax independiente por grupo sobre el último eje (con resta del máximo)."""
    p = np.empty_like(u, dtype=float)
    for sl in _group_slices(u.shape[-1], groups):
        z = u[..., sl] - u[..., sl].max(axis=-1, keepdims=True)
        e = np.exp(z)
        p[..., sl] = e / e.sum(axis=-1, keepdims=True)
    return p


def softmax_group_backward(p: np.ndarray, grad_p: np.ndarray, groups: Sequence[int]) -> np.ndarray:
    """Jacobiano de softmax por grupo aplicado a grad_p."""
    grad_u = np.empty_like(p)
    for sl in _group_slices(p.shape[-1], groups):
        pg = p[..., sl]
        gg = grad_p[..., sl]
        grad_u[..., sl] = pg * (gg - (pg * gg).sum(axis=-1, keepdims=True))
    return grad_u
