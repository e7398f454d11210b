"""
Mapas afines para la vía propioceptiva.

Los pesos siguen la convención w[i, j]: de la neurona j hacia la neurona i.
"""

from typing import Optional, Tuple

import numpy as np

from network.errors import ConfigurationError


def affine(w: np.ndarray, x: np.ndarray, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """y_i = sum_j w_ij x_j + b_i sobre el último eje de x"""
    if w.ndim != 2 or x.shape[-1] != w.shape[1]:
        raise ConfigurationError(f"affine: pesos {w.shape} incompatibles con vector {x.shape}")
    y = x @ w.T
    if bias is not None:
        y = y + bias
    return y


def affine_backward(w: np.ndarray, x: np.ndarray, grad_out: np.ndarray,
                    need_input: bool = True, need_weights: bool = True
                    ) -> Tuple[Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]:
    """Gradientes de <grad_out, affine(w, x, b)> respecto a x, w y b."""
    if grad_out.shape[-1] != w.shape[0] or grad_out.shape[:-1] != x.shape[:-1]:
        raise ConfigurationError(f"affine_backward: grad_out {grad_out.shape} no corresponde a {x.shape}")
    grad_w = grad_b = None
    if need_weights:
        g2 = grad_out.reshape(-1, w.shape[0])
        grad_w = g2.T @ x.reshape(-1, w.shape[1])
        grad_b = g2.sum(axis=0)
    grad_x = grad_out @ w if need_input else None
    return grad_x, grad_w, grad_b
