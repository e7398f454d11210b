"""
Exportación de cuadros a PGM binario (P5, maxval 255) con Pillow.
"""

import logging
from pathlib import Path
from typing import List

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)


def quantize(v: np.ndarray) -> np.ndarray:
    """[-1, 1] -> [0, 255] con redondeo hacia arriba en .5: floor(127.5 (v + 1) + 0.5)"""
    q = np.floor(127.5 * (np.clip(np.asarray(v, dtype=float), -1.0, 1.0) + 1.0) + 0.5)
    return q.astype(np.uint8)


def dequantize(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float) / 127.5 - 1.0


def dump_frames(frames: np.ndarray, directory: Path, prefix: str = "frame") -> List[Path]:
    """
    Escribe un .pgm por cuadro con el índice de paso rellenado con ceros.

    Args:
        frames: (T, H, W) o (T, 1, H, W) en [-1, 1]
        directory: carpeta de salida (se crea si no existe)
        prefix: prefijo de los nombres de archivo

    Returns:
        Rutas escritas en orden
    """
    frames = np.asarray(frames)
    if frames.ndim == 4:
        frames = frames[:, 0]
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(max(len(frames) - 1, 0))))
    paths = []
    for step, frame in enumerate(frames):
        path = directory / f"{prefix}_{step:0{digits}d}.pgm"
        # un arreglo uint8 de dos ejes se guarda en escala de grises (modo L)
        Image.fromarray(quantize(frame)).save(path)
        paths.append(path)
    logger.info("%d cuadros escritos en %s", len(paths), directory)
    return paths


def read_frame(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return dequantize(np.array(img))
