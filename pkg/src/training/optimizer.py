"""
Adam con corrección de sesgo sobre diccionarios de tensores con nombre.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np

from network.errors import ConfigurationError


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_tensors(cls, tensors: Dict[str, np.ndarray], names: Optional[Iterable[str]] = None) -> "AdamState":
        names = list(tensors) if names is None else list(names)
        return cls(m={n: np.zeros_like(tensors[n]) for n in names},
                   v={n: np.zeros_like(tensors[n]) for n in names})

    def reset(self):
        for name in self.m:
            self.m[name].fill(0.0)
            self.v[name].fill(0.0)
        self.step = 0


def adam_step(tensors: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Dict[str, np.ndarray]:
    """
    Un paso de Adam; modifica `tensors` en su lugar y lo devuelve.

    m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

    Sólo se actualizan los tensores presentes en el estado de Adam.
    """
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for name in state.m:
        g = grads[name]
        if g.shape != tensors[name].shape:
            raise ConfigurationError(f"adam_step: gradiente {name} con forma {g.shape}, "
                                     f"se esperaba {tensors[name].shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        tensors[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return tensors
