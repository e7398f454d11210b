"""
Gráficos de análisis: curvas de pérdida, trayectorias articulares y
proyecciones PCA. Todos se guardan como PNG sin abrir ventanas.
"""

import logging
from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

logger = logging.getLogger(__name__)

sns.set_theme(style="whitegrid", context="paper")


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=300, bbox_inches="tight")
    plt.close(fig)
    logger.info("gráfico guardado en %s", path)
    return path


def plot_loss_curve(history: pd.DataFrame, path: Path) -> Path:
    """Pérdida total y por modalidad frente a la época, en escala logarítmica"""
    fig, ax = plt.subplots(figsize=(7, 4))
    for column, label in (("E", "total"), ("E_V", "visual"), ("E_P", "propioceptiva")):
        values = history[column].clip(lower=1e-12)
        ax.plot(history["epoch"], values, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("época")
    ax.set_ylabel("pérdida")
    ax.legend()
    return _save(fig, path)


def plot_joint_trajectories(predicted: np.ndarray, path: Path, target: Optional[np.ndarray] = None,
                            title: str = "") -> Path:
    """
    Args:
        predicted: (T, 2) ángulos izquierdo y derecho decodificados
        target: (T, 2) ángulos de referencia (opcional, línea discontinua)
    """
    fig, ax = plt.subplots(figsize=(7, 3.5))
    steps = np.arange(len(predicted))
    palette = sns.color_palette(n_colors=2)
    for j, name in enumerate(("izquierda", "derecha")):
        ax.plot(steps, predicted[:, j], color=palette[j], label=f"{name} (red)")
        if target is not None:
            ax.plot(steps, target[:, j], color=palette[j], linestyle="--", label=f"{name} (objetivo)")
    ax.set_xlabel("paso")
    ax.set_ylabel("ángulo [rad]")
    if title:
        ax.set_title(title)
    ax.legend(ncol=2, fontsize=7)
    return _save(fig, path)


def plot_pca_scatter(frame: pd.DataFrame, path: Path, hue: str = "primitive", title: str = "") -> Path:
    """Dispersión pc1 vs pc2 coloreada por la columna `hue`"""
    fig, ax = plt.subplots(figsize=(5, 5))
    y = "pc2" if "pc2" in frame.columns else "pc1"
    style = "source" if "source" in frame.columns else None
    sns.scatterplot(data=frame, x="pc1", y=y, hue=hue, style=style, palette="tab20", ax=ax, s=30)
    if "primitive" in frame.columns:
        for _, row in frame.iterrows():
            ax.annotate(str(row["primitive"]), (row["pc1"], row[y]), fontsize=6)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=6, bbox_to_anchor=(1.02, 1), loc="upper left")
    return _save(fig, path)
