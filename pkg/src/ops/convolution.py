"""
Convoluciones densas con su paso hacia atrás exacto.

Los mapas se guardan como arreglos (..., mapas, alto, ancho) en doble
precisión; las dimensiones iniciales (lote de secuencias) se propagan sin
cambios. Un Kernel4 tiene forma (mapas_salida, mapas_entrada, kh, kw) y su
stride es (stride_y, stride_x).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from network.errors import ConfigurationError

# (entrada, kernel, bias); None cuando no se pidió
Grads = Tuple[Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]


@dataclass(frozen=True)
class Kernel4:
    data: np.ndarray
    stride: Tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ConfigurationError(f"Kernel4 requiere 4 ejes, recibió {self.data.shape}")
        if min(self.stride) < 1:
            raise ConfigurationError(f"stride inválido {self.stride}")

    @property
    def out_maps(self) -> int:
        return self.data.shape[0]

    @property
    def in_maps(self) -> int:
        return self.data.shape[1]

    @property
    def extent(self) -> Tuple[int, int]:
        return self.data.shape[2], self.data.shape[3]


def valid_extent(size: Tuple[int, int], kernel: Tuple[int, int], stride: Tuple[int, int]) -> Tuple[int, int]:
    """floor((in - k) / stride) + 1 por eje"""
    return tuple((s - k) // st + 1 for s, k, st in zip(size, kernel, stride))


def transposed_extent(size: Tuple[int, int], kernel: Tuple[int, int], stride: Tuple[int, int]) -> Tuple[int, int]:
    """stride * (in - 1) + k por eje"""
    return tuple(st * (s - 1) + k for s, k, st in zip(size, kernel, stride))


def same_padding(kernel: Tuple[int, int]) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    # Igual que SAME de TensorFlow con stride 1: piso antes, techo después
    return tuple(((k - 1) // 2, (k - 1) - (k - 1) // 2) for k in kernel)


def _windows(x: np.ndarray, kernel: Kernel4) -> np.ndarray:
    kh, kw = kernel.extent
    sy, sx = kernel.stride
    win = sliding_window_view(x, (kh, kw), axis=(-2, -1))
    return win[..., ::sy, ::sx, :, :]


def _flat_lead(a: np.ndarray, trailing: int) -> np.ndarray:
    return a.reshape((-1,) + a.shape[a.ndim - trailing:])


def _bias_grad(grad_out: np.ndarray) -> np.ndarray:
    return _flat_lead(grad_out, 3).sum(axis=(0, 2, 3))


def conv_valid(x: np.ndarray, kernel: Kernel4, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """Convolución válida (correlación) con stride; un bias escalar por mapa de salida."""
    kh, kw = kernel.extent
    if x.ndim < 3 or x.shape[-3] != kernel.in_maps:
        raise ConfigurationError(
            f"conv_valid: entrada {x.shape} incompatible con kernel {kernel.data.shape}")
    if x.shape[-2] < kh or x.shape[-1] < kw:
        raise ConfigurationError(
            f"conv_valid: entrada {x.shape[-2:]} menor que el kernel {(kh, kw)}")
    win = _windows(x, kernel)
    nd = win.ndim
    out = np.tensordot(win, kernel.data, axes=([nd - 5, nd - 2, nd - 1], [1, 2, 3]))
    out = np.moveaxis(out, -1, -3)
    if bias is not None:
        out = out + bias[:, None, None]
    return np.ascontiguousarray(out)


def conv_transposed(y: np.ndarray, kernel: Kernel4, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """Adjunto lineal exacto de conv_valid con el mismo kernel."""
    if y.ndim < 3 or y.shape[-3] != kernel.out_maps:
        raise ConfigurationError(
            f"conv_transposed: entrada {y.shape} incompatible con kernel {kernel.data.shape}")
    kh, kw = kernel.extent
    sy, sx = kernel.stride
    ho, wo = y.shape[-2:]
    h, w = transposed_extent((ho, wo), (kh, kw), (sy, sx))
    # (..., ho, wo, C, kh, kw)
    cols = np.tensordot(y, kernel.data, axes=([y.ndim - 3], [0]))
    if ho == 1 and wo == 1:
        out = np.ascontiguousarray(cols[..., 0, 0, :, :, :])
    else:
        out = np.zeros(y.shape[:-3] + (kernel.in_maps, h, w))
        for i in range(kh):
            for j in range(kw):
                out[..., :, i:i + sy * (ho - 1) + 1:sy, j:j + sx * (wo - 1) + 1:sx] += \
                    np.moveaxis(cols[..., i, j], -1, -3)
    if bias is not None:
        out = out + bias[:, None, None]
    return out


def conv_backward(x: np.ndarray, kernel: Kernel4, grad_out: np.ndarray,
                  need_input: bool = True, need_kernel: bool = True) -> Grads:
    """Gradientes de <grad_out, conv_valid(x, k, b)> respecto a x, k y b."""
    win = _windows(x, kernel)
    if win.shape[-4:-2] != grad_out.shape[-2:] or grad_out.shape[-3] != kernel.out_maps:
        raise ConfigurationError(
            f"conv_backward: grad_out {grad_out.shape} no corresponde a la salida de {x.shape}")
    grad_k = grad_b = None
    if need_kernel:
        g2 = _flat_lead(grad_out, 3)
        grad_k = np.tensordot(g2, _flat_lead(win, 5), axes=([0, 2, 3], [0, 2, 3]))
        grad_b = g2.sum(axis=(0, 2, 3))
    grad_x = None
    if need_input:
        back = conv_transposed(grad_out, kernel)
        if back.shape == x.shape:
            grad_x = back
        else:
            # el piso de la fórmula de forma descarta filas/columnas finales
            grad_x = np.zeros_like(x)
            grad_x[..., :back.shape[-2], :back.shape[-1]] = back
    return grad_x, grad_k, grad_b


def conv_transposed_backward(y: np.ndarray, kernel: Kernel4, grad_out: np.ndarray,
                             need_input: bool = True, need_kernel: bool = True) -> Grads:
    """Gradientes de <grad_out, conv_transposed(y, k, b)> respecto a y, k y b."""
    grad_k = grad_b = None
    if need_kernel:
        win = _windows(grad_out, kernel)
        grad_k = np.tensordot(_flat_lead(y, 3), _flat_lead(win, 5), axes=([0, 2, 3], [0, 2, 3]))
        grad_b = _bias_grad(grad_out)
    grad_y = conv_valid(grad_out, kernel) if need_input else None
    return grad_y, grad_k, grad_b


def conv_same(x: np.ndarray, kernel: Kernel4, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """Convolución recurrente que conserva la extensión (stride 1, relleno con ceros)."""
    if kernel.stride != (1, 1):
        raise ConfigurationError("conv_same sólo admite stride (1, 1)")
    pads = same_padding(kernel.extent)
    xp = np.pad(x, [(0, 0)] * (x.ndim - 2) + list(pads))
    return conv_valid(xp, kernel, bias)


def conv_same_backward(x: np.ndarray, kernel: Kernel4, grad_out: np.ndarray,
                       need_input: bool = True, need_kernel: bool = True) -> Grads:
    (pt, pb), (pl, pr) = same_padding(kernel.extent)
    xp = np.pad(x, [(0, 0)] * (x.ndim - 2) + [(pt, pb), (pl, pr)])
    grad_xp, grad_k, grad_b = conv_backward(xp, kernel, grad_out, need_input, need_kernel)
    grad_x = None
    if grad_xp is not None:
        grad_x = grad_xp[..., pt:pt + x.shape[-2], pl:pl + x.shape[-1]]
    return grad_x, grad_k, grad_b
