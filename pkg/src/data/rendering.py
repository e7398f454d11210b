"""
Render sintético de la silueta del tutor: torso, cabeza y dos brazos.

El dibujo se hace con cápsulas analíticas en coordenadas centradas
horizontalmente, de modo que intercambiar los ángulos izquierdo y derecho
produce exactamente el espejo horizontal del cuadro. El brazo izquierdo
aparece a la izquierda de la imagen.
"""

import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Geometría relativa a (alto, ancho) de la imagen
TORSO_TOP = 0.42
TORSO_HALF_WIDTH = 0.11
HEAD_CENTER = 0.24
HEAD_RADIUS = 0.11
SHOULDER_ROW = 0.48
ELBOW_OFFSET = 0.24
UPPER_ARM_RADIUS = 0.035
FOREARM_LENGTH = 0.30
FOREARM_RADIUS = 0.045

BACKGROUND = 0
SILHOUETTE = 255


def _grid(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.arange(height, dtype=float)[:, None]
    cols = np.arange(width, dtype=float)[None, :] - (width - 1) / 2.0
    return np.broadcast_to(cols, (height, width)), np.broadcast_to(rows, (height, width))


def _segment_distance(x, y, x0, y0, x1, y1) -> np.ndarray:
    dx, dy = x1 - x0, y1 - y0
    length2 = dx * dx + dy * dy
    t = np.clip(((x - x0) * dx + (y - y0) * dy) / length2, 0.0, 1.0) if length2 > 0 else 0.0
    px = x - x0 - t * dx
    py = y - y0 - t * dy
    return np.sqrt(px * px + py * py)


def _coverage(distance: np.ndarray, radius: float) -> np.ndarray:
    # borde suavizado de un píxel de ancho
    return np.clip(radius + 0.5 - distance, 0.0, 1.0)


def render_gray(joints: np.ndarray, height: int = 48, width: int = 64,
                joint_range: Tuple[float, float] = (-1.0, 1.0)) -> Tuple[np.ndarray, bool]:
    """
    Dibuja la silueta en escala de grises uint8.

    Args:
        joints: (ángulo izquierdo, ángulo derecho) del codo en radianes; 0 = antebrazo vertical
        height, width: tamaño de la imagen
        joint_range: rango válido; fuera de él los ángulos se recortan

    Returns:
        (imagen uint8 (alto, ancho), bandera de recorte)
    """
    lo, hi = joint_range
    joints = np.asarray(joints, dtype=float)
    clipped = np.clip(joints, lo, hi)
    flagged = bool(np.any(clipped != joints))
    if flagged:
        logger.warning("render_frame: ángulos %s fuera de [%s, %s], se recortan", joints.tolist(), lo, hi)
    theta_left, theta_right = clipped

    x, y = _grid(height, width)
    scale = float(min(height, width * 0.75))
    cover = np.zeros((height, width))

    # torso y cabeza (simétricos respecto al eje central)
    torso_half = TORSO_HALF_WIDTH * width
    inside = (np.abs(x) <= torso_half) & (y >= TORSO_TOP * height)
    cover = np.maximum(cover, inside.astype(float))
    head = np.sqrt(x * x + (y - HEAD_CENTER * height) ** 2)
    cover = np.maximum(cover, _coverage(head, HEAD_RADIUS * scale))

    shoulder_y = SHOULDER_ROW * height
    elbow_x = ELBOW_OFFSET * width
    forearm = FOREARM_LENGTH * scale
    for side, theta in ((-1.0, theta_left), (1.0, theta_right)):
        ex = side * elbow_x
        sx = side * torso_half
        cover = np.maximum(cover, _coverage(
            _segment_distance(x, y, sx, shoulder_y, ex, shoulder_y), UPPER_ARM_RADIUS * scale))
        tip_x = side * (elbow_x + forearm * np.sin(theta))
        tip_y = shoulder_y - forearm * np.cos(theta)
        cover = np.maximum(cover, _coverage(
            _segment_distance(x, y, ex, shoulder_y, tip_x, tip_y), FOREARM_RADIUS * scale))

    gray = np.floor(BACKGROUND + (SILHOUETTE - BACKGROUND) * cover + 0.5).astype(np.uint8)
    return gray, flagged


def gray_to_unit(gray: np.ndarray) -> np.ndarray:
    """v = 2 * gray / 255 - 1"""
    return 2.0 * gray.astype(float) / 255.0 - 1.0


def render_frame(joints: np.ndarray, height: int = 48, width: int = 64,
                 joint_range: Tuple[float, float] = (-1.0, 1.0)) -> Tuple[np.ndarray, bool]:
    """Cuadro normalizado a [-1, 1] y bandera de recorte"""
    gray, flagged = render_gray(joints, height, width, joint_range)
    return gray_to_unit(gray), flagged
