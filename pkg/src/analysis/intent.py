"""
Clasificación de la intención inferida por vecino más cercano.

Cada estado de inicio de ventana inferido por ERS se compara (distancia
euclidiana sobre u de V_S y P_S concatenados) con los estados iniciales
aprendidos de cada primitiva.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from network.errors import ConfigurationError
from network.parameters import Parameters

logger = logging.getLogger(__name__)

TOP_LAYERS = ("vs", "ps")


@dataclass
class IntentResult:
    table: pd.DataFrame
    accuracy: float
    burn_in: int


def top_vectors(states: Dict[str, np.ndarray], layers: Sequence[str] = TOP_LAYERS) -> np.ndarray:
    """capa -> (n, ...) a una matriz (n, d) con las capas concatenadas"""
    n = states[layers[0]].shape[0]
    return np.concatenate([np.asarray(states[name], dtype=float).reshape(n, -1) for name in layers], axis=1)


def reference_states(params: Parameters, layers: Sequence[str] = TOP_LAYERS):
    """(ids, matriz (n_primitivas, d)) de los estados iniciales del checkpoint"""
    states = {name: params.tensors[f"init.{name}"] for name in layers}
    return list(params.sequence_ids), top_vectors(states, layers)


def nearest_labels(inferred: np.ndarray, ref_ids: Sequence[int], references: np.ndarray) -> np.ndarray:
    """
    Etiqueta del estado de referencia más cercano; los empates se resuelven
    a favor del id de primitiva más bajo.
    """
    if len(ref_ids) == 0:
        raise ConfigurationError("classify_inferred_intent: no hay estados de referencia")
    inferred = np.atleast_2d(np.asarray(inferred, dtype=float))
    references = np.asarray(references, dtype=float)
    if inferred.shape[1] != references.shape[1]:
        raise ConfigurationError(f"dimensiones incompatibles: {inferred.shape[1]} vs {references.shape[1]}")
    order = np.argsort(np.asarray(ref_ids), kind="stable")
    ids = np.asarray(ref_ids)[order]
    refs = references[order]
    dist = ((inferred[:, None, :] - refs[None, :, :]) ** 2).sum(axis=-1)
    # argmin devuelve la primera ocurrencia: con ids ordenados, el menor id
    return ids[np.argmin(dist, axis=1)]


def classify_inferred_intent(inferred: np.ndarray, ref_ids: Sequence[int], references: np.ndarray,
                             schedule: Optional[np.ndarray] = None, window: int = 30,
                             burn_in: Optional[int] = None) -> IntentResult:
    """
    Args:
        inferred: (T, d) estados de inicio de ventana (V_S + P_S) por paso
        ref_ids: ids de las primitivas de referencia
        references: (n, d) estados iniciales aprendidos
        schedule: (T,) primitiva vigente en cada paso del flujo
        window: W de ERS; la etiqueta verdadera es la del inicio de la ventana
        burn_in: pasos excluidos de la exactitud (por defecto W)

    Returns:
        IntentResult con la tabla por paso y la exactitud tras el burn-in
    """
    labels = nearest_labels(inferred, ref_ids, references)
    steps = len(labels)
    burn_in = window if burn_in is None else burn_in
    table = pd.DataFrame({"t": np.arange(steps), "predicted": labels})
    accuracy = float("nan")
    if schedule is not None:
        schedule = np.asarray(schedule)
        if len(schedule) != steps:
            raise ConfigurationError(f"schedule de {len(schedule)} pasos para {steps} estados")
        starts = np.maximum(0, np.arange(steps) - window)
        truth = schedule[starts]
        table["truth"] = truth
        table["correct"] = labels == truth
        scored = table["t"] >= burn_in
        if scored.any():
            accuracy = float(table.loc[scored, "correct"].mean())
    logger.info("intención inferida: exactitud %.3f tras %d pasos de burn-in", accuracy, burn_in)
    return IntentResult(table, accuracy, burn_in)
