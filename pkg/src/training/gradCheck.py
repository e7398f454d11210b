"""
Verificación de gradientes BPTT contra diferencias finitas centrales.

Pensado para configuraciones diminutas: cada elemento de cada tensor
aprendible (incluidos los estados iniciales) se perturba por separado.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.networkConfig import NetworkConfig
from config.randomStreams import stream_rng
from data.gestureSynth import SequencePair
from network.parameters import Parameters, init_params
from training.trainer import bptt_gradients, dataset_loss

logger = logging.getLogger(__name__)

GradientFn = Callable[[Parameters, List[SequencePair]], Dict[str, np.ndarray]]

# norma por debajo de la cual ambos gradientes se consideran nulos
NORM_FLOOR = 1e-10


@dataclass
class GradCheckReport:
    errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-3
    eps: float = 1e-5

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def worst(self) -> str:
        return max(self.errors, key=self.errors.get) if self.errors else ""

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tensor": list(self.errors), "rel_error": list(self.errors.values())})


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||)"""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < NORM_FLOOR:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def random_problem(config: NetworkConfig, seed: int, sequences: int = 2,
                   steps: int = 5) -> Tuple[Parameters, List[SequencePair]]:
    """
    Parámetros y observaciones aleatorias sobre una topología pequeña.

    Los biases y estados iniciales se sortean lejos de cero para que todos
    los caminos del grafo tengan gradiente.
    """
    params = init_params(config, seed, n_sequences=sequences)
    rng = stream_rng(seed, "gradcheck")
    for name in params.tensors:
        if name.endswith(".b") or name.startswith("init."):
            params.tensors[name] = rng.uniform(-0.5, 0.5, size=params.tensors[name].shape)

    data = []
    for i in range(sequences):
        frames = rng.uniform(-0.9, 0.9, size=(steps, config.image_height, config.image_width))
        logits = rng.normal(size=(steps, config.proprio_groups, config.units_per_group))
        codes = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
        data.append(SequencePair(primitive_id=i, frames=frames, joints=np.zeros((steps, 2)),
                                 codes=codes.reshape(steps, -1)))
    return params, data


def numeric_gradients(params: Parameters, data: List[SequencePair], eps: float) -> Dict[str, np.ndarray]:
    grads = {}
    for name, tensor in params.tensors.items():
        grad = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        out = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            plus = dataset_loss(params, data).total
            flat[i] = keep - eps
            minus = dataset_loss(params, data).total
            flat[i] = keep
            out[i] = (plus - minus) / (2.0 * eps)
        grads[name] = grad
    return grads


def _bptt(params: Parameters, data: List[SequencePair]) -> Dict[str, np.ndarray]:
    grads, _ = bptt_gradients(params, data)
    return grads


def grad_check(config: NetworkConfig, seed: int = 0, eps: float = 1e-5, tolerance: float = 1e-3,
               steps: int = 5, sequences: int = 2,
               gradient_fn: Optional[GradientFn] = None) -> GradCheckReport:
    """
    Compara gradientes analíticos y numéricos tensor por tensor.

    Args:
        config: topología pequeña (p. ej. el preset "tiny")
        seed: semilla de parámetros y datos
        eps: paso de las diferencias centrales
        tolerance: error relativo máximo aceptado
        steps: largo T de cada secuencia aleatoria
        sequences: cantidad de secuencias (y de estados iniciales)
        gradient_fn: gradiente analítico alternativo (por defecto BPTT)

    Returns:
        GradCheckReport con el error relativo por tensor
    """
    params, data = random_problem(config, seed, sequences, steps)
    analytic = (gradient_fn or _bptt)(params, data)
    numeric = numeric_gradients(params, data, eps)
    report = GradCheckReport(tolerance=tolerance, eps=eps)
    for name in params.tensors:
        report.errors[name] = relative_error(analytic[name], numeric[name])
        logger.debug("gradcheck %s: %.3e", name, report.errors[name])
    logger.info("gradcheck: error máximo %.3e en %s (tolerancia %.1e)",
                report.max_error, report.worst(), tolerance)
    return report
