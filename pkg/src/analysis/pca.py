"""
PCA por descomposición en valores singulares de la matriz centrada, con
proyecciones de estados iniciales y de activaciones dinámicas.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Literal, Optional, Sequence

import numpy as np
import pandas as pd

from network.errors import ConfigurationError
from network.parameters import Parameters

logger = logging.getLogger(__name__)


@dataclass
class PcaResult:
    components: np.ndarray       # (k, d), filas ortonormales
    projections: np.ndarray      # (n, k)
    explained_ratio: np.ndarray  # (k,)
    mean: np.ndarray             # (d,)

    def transform(self, data: np.ndarray) -> np.ndarray:
        """Proyecta datos nuevos sobre la base ya ajustada"""
        return (np.asarray(data, dtype=float) - self.mean) @ self.components.T


def pca(data: np.ndarray, k: int) -> PcaResult:
    """
    Args:
        data: matriz (n, d), una observación por fila
        k: componentes a conservar, k <= min(n, d)

    Returns:
        PcaResult; el signo de cada componente deja positiva su entrada de mayor magnitud
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ConfigurationError(f"pca requiere una matriz con n >= 2 filas, recibió {data.shape}")
    n, d = data.shape
    if not 1 <= k <= min(n, d):
        raise ConfigurationError(f"pca: k={k} fuera de [1, {min(n, d)}]")

    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    for i, row in enumerate(components):
        if row[np.argmax(np.abs(row))] < 0:
            components[i] = -row

    variance = s ** 2
    total = variance.sum()
    ratio = variance[:k] / total if total > 0 else np.zeros(k)
    return PcaResult(components, centered @ components.T, ratio, mean)


# ==========================
# Estados iniciales
# ==========================
def project_initial_states(params: Parameters, layers: Sequence[str] = ("vs", "ps"), k: int = 2,
                           out_dir: Optional[Path] = None) -> Dict[str, pd.DataFrame]:
    """
    PCA de los estados iniciales aprendidos de la capa superior de cada vía.

    Returns:
        capa -> DataFrame (primitive, pc1..pck, ratio_1..ratio_k)
    """
    if "init.vs" not in params.tensors or params.n_sequences < 2:
        raise ConfigurationError("el checkpoint no tiene estados iniciales suficientes para la PCA")
    frames = {}
    for layer in layers:
        rows = params.tensors[f"init.{layer}"].reshape(params.n_sequences, -1)
        result = pca(rows, min(k, rows.shape[0], rows.shape[1]))
        df = pd.DataFrame({"primitive": params.sequence_ids})
        for i in range(result.projections.shape[1]):
            df[f"pc{i + 1}"] = result.projections[:, i]
        for i, r in enumerate(result.explained_ratio):
            df[f"ratio_{i + 1}"] = r
        frames[layer] = df
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            df.to_csv(Path(out_dir) / f"initial_states_{layer}.csv", index=False)
    return frames


# ==========================
# Activaciones dinámicas
# ==========================
def project_activations(train: Dict[str, np.ndarray], test: Dict[str, np.ndarray],
                        layers: Sequence[str] = ("vs", "ps", "pf"), k: int = 2,
                        fit: Literal["train", "joint"] = "train",
                        out_dir: Optional[Path] = None,
                        train_labels: Optional[Sequence[int]] = None,
                        test_labels: Optional[Sequence[int]] = None) -> Dict[str, pd.DataFrame]:
    """
    Proyecta activaciones de entrenamiento y de prueba en un plano común.

    Args:
        train: capa -> (n_train, d) activaciones de la regeneración de las primitivas
        test: capa -> (n_test, d) activaciones de la corrida de prueba
        fit: "train" ajusta la base con las de entrenamiento y proyecta las de
             prueba; "joint" ajusta con ambas
        train_labels, test_labels: primitiva de cada fila (opcional)

    Returns:
        capa -> DataFrame (source, index, label, pc1..pck)
    """
    if fit not in ("train", "joint"):
        raise ConfigurationError(f"fit desconocido: {fit}")
    frames = {}
    for layer in layers:
        a = np.asarray(train[layer], dtype=float)
        b = np.asarray(test[layer], dtype=float)
        basis = a if fit == "train" else np.concatenate([a, b])
        result = pca(basis, min(k, basis.shape[0], basis.shape[1]))
        proj = np.concatenate([result.transform(a), result.transform(b)])
        df = pd.DataFrame({
            "source": ["train"] * len(a) + ["test"] * len(b),
            "index": np.concatenate([np.arange(len(a)), np.arange(len(b))]),
        })
        labels_a = list(train_labels) if train_labels is not None else [-1] * len(a)
        labels_b = list(test_labels) if test_labels is not None else [-1] * len(b)
        df["label"] = labels_a + labels_b
        for i in range(proj.shape[1]):
            df[f"pc{i + 1}"] = proj[:, i]
        frames[layer] = df
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            df.to_csv(Path(out_dir) / f"activations_{layer}.csv", index=False)
    return frames
