"""
Codificación poblacional (softmax) de los ángulos articulares.

Cada articulación se representa con un grupo de unidades con centros
equiespaciados en [joint_min, joint_max]:

    p_i = exp(-(theta - c_i)^2 / sigma^2) / sum_j exp(-(theta - c_j)^2 / sigma^2)
"""

from functools import lru_cache
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from network.errors import ConfigurationError

# Resolución de la tabla de calibración del decodificador
CALIBRATION_POINTS = 4001


class CodingConfig(BaseModel):
    groups: int = Field(2, ge=1)
    units: int = Field(10, ge=2)
    joint_min: float = -1.0
    joint_max: float = 1.0
    width_factor: float = Field(1.5, gt=0.0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _range(self):
        if not self.joint_max > self.joint_min:
            raise ValueError(f"rango articular vacío [{self.joint_min}, {self.joint_max}]")
        return self

    @property
    def centers(self) -> np.ndarray:
        return np.linspace(self.joint_min, self.joint_max, self.units)

    @property
    def spacing(self) -> float:
        return (self.joint_max - self.joint_min) / (self.units - 1)

    @property
    def sigma(self) -> float:
        return self.width_factor * self.spacing

    @property
    def joint_range(self) -> float:
        return self.joint_max - self.joint_min

    @property
    def size(self) -> int:
        return self.groups * self.units


def _group_response(theta: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    z = -((theta[..., None] - centers) ** 2) / sigma ** 2
    z -= z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def encode_joints(angles: np.ndarray, coding: CodingConfig) -> np.ndarray:
    """
    Args:
        angles: (..., groups) ángulos en radianes

    Returns:
        (..., groups * units) distribuciones, una por grupo
    """
    angles = np.asarray(angles, dtype=float)
    if angles.shape[-1] != coding.groups:
        raise ConfigurationError(f"encode_joints: se esperaban {coding.groups} ángulos, recibió {angles.shape}")
    code = _group_response(angles, coding.centers, coding.sigma)
    return code.reshape(angles.shape[:-1] + (coding.size,))


@lru_cache(maxsize=16)
def _calibration(coding: CodingConfig) -> Tuple[np.ndarray, np.ndarray]:
    # respuesta media (estrictamente creciente) del codificador sobre el rango
    grid = np.linspace(coding.joint_min, coding.joint_max, CALIBRATION_POINTS)
    mean = _group_response(grid, coding.centers, coding.sigma) @ coding.centers
    return mean, grid


def decode_joints(code: np.ndarray, coding: CodingConfig, calibrated: bool = True) -> np.ndarray:
    """
    Decodifica un código poblacional a ángulos.

    Con calibrated=False devuelve sum_i p_i c_i: un código concentrado en un
    único centro c_k decodifica exactamente a c_k, pero los códigos que
    produce encode_joints quedan sesgados hacia el centro del rango.

    Con calibrated=True (por defecto) invierte además la respuesta media del
    codificador, de modo que decode_joints(encode_joints(theta)) recupera
    theta. A cambio, un código concentrado en un centro ya no decodifica a
    ese centro: la tabla lo trata como la media de un código de encode_joints.
    Quien necesite la lectura exacta de códigos concentrados debe pasar
    calibrated=False.

    Args:
        code: (..., groups * units)
        coding: configuración usada al codificar
        calibrated: aplicar la tabla de calibración

    Returns:
        (..., groups) ángulos
    """
    code = np.asarray(code, dtype=float)
    if code.shape[-1] != coding.size:
        raise ConfigurationError(f"decode_joints: se esperaban {coding.size} unidades, recibió {code.shape}")
    groups = code.reshape(code.shape[:-1] + (coding.groups, coding.units))
    weights = groups / groups.sum(axis=-1, keepdims=True)
    raw = weights @ coding.centers
    if not calibrated:
        return raw
    mean, grid = _calibration(coding)
    return np.interp(raw, mean, grid)


def normalize_groups(code: np.ndarray, coding: CodingConfig) -> np.ndarray:
    """Renormaliza cada grupo a suma 1 en doble precisión"""
    code = np.asarray(code, dtype=float)
    groups = code.reshape(code.shape[:-1] + (coding.groups, coding.units))
    return (groups / groups.sum(axis=-1, keepdims=True)).reshape(code.shape)
