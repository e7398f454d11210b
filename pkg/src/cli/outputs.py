"""
Formato compartido de las salidas generadas (simulate, entrain, ers).

Cada corrida escribe outputs.csv (step, joint_left, joint_right, p0..p{P-1})
y la carpeta frames/ con un PGM por paso.
"""

import logging
import os
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from analysis.frames import dump_frames, read_frame
from data.coding import CodingConfig, decode_joints, normalize_groups
from network.errors import ConfigurationError, FileFormatError

logger = logging.getLogger(__name__)

OUTPUTS_FILE = "outputs.csv"
FRAMES_DIR = "frames"


def ensure_output_dir(path: Path) -> Path:
    """Crea el directorio de salida o falla con ConfigurationError si no es escribible"""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"no se puede crear el directorio de salida {path}: {e}") from e
    if not os.access(path, os.W_OK):
        raise ConfigurationError(f"el directorio de salida {path} no es escribible")
    return path


def ensure_output_file(path: Path) -> Path:
    path = Path(path)
    ensure_output_dir(path.parent if str(path.parent) else Path("."))
    if path.exists() and not os.access(path, os.W_OK):
        raise ConfigurationError(f"el archivo de salida {path} no es escribible")
    return path


def generation_frame(p_out: np.ndarray, coding: CodingConfig) -> pd.DataFrame:
    codes = normalize_groups(np.asarray(p_out, dtype=float), coding)
    joints = decode_joints(codes, coding)
    table = pd.DataFrame({"step": np.arange(len(codes)),
                          "joint_left": joints[:, 0],
                          "joint_right": joints[:, 1]})
    for i in range(codes.shape[1]):
        table[f"p{i}"] = codes[:, i]
    return table


def write_generation(out_dir: Path, v_out: np.ndarray, p_out: np.ndarray, coding: CodingConfig) -> Path:
    """
    Args:
        out_dir: directorio de la corrida
        v_out: (T, 1, H, W) o (T, H, W) cuadros predichos
        p_out: (T, P) códigos predichos
        coding: código poblacional para decodificar los ángulos

    Returns:
        ruta de outputs.csv
    """
    out_dir = ensure_output_dir(out_dir)
    path = out_dir / OUTPUTS_FILE
    generation_frame(p_out, coding).to_csv(path, index=False)
    dump_frames(v_out, out_dir / FRAMES_DIR)
    logger.info("salidas escritas en %s (%d pasos)", out_dir, len(p_out))
    return path


def read_generation(out_dir: Path) -> Tuple[np.ndarray, np.ndarray]:
    """(cuadros (T, H, W) cuantizados, códigos (T, P)) de una corrida"""
    out_dir = Path(out_dir)
    path = out_dir / OUTPUTS_FILE
    if not path.exists():
        raise FileFormatError(f"no existe {path}")
    table = pd.read_csv(path)
    codes = table[[c for c in table.columns if c.startswith("p") and c[1:].isdigit()]].to_numpy(dtype=float)
    frames_paths = sorted((out_dir / FRAMES_DIR).glob("*.pgm"))
    if len(frames_paths) != len(table):
        raise FileFormatError(f"{out_dir}: {len(frames_paths)} cuadros para {len(table)} pasos")
    frames = np.stack([read_frame(p) for p in frames_paths])
    return frames, codes
