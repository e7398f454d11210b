#!/usr/bin/env python3
"""
Configuración tipada de la red, el entrenamiento y la regresión de error.

Los presets viven como YAML versionados en src/config/presets/ para poder
auditar "table1" contra la arquitectura de referencia de 4/8/12 mapas.
"""

from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from network.errors import ConfigurationError
from ops.convolution import transposed_extent, valid_extent

PRESETS_DIR = Path(__file__).resolve().parent / "presets"

VISUAL_LAYERS = ("vf", "vm", "vs")
PROPRIO_LAYERS = ("pf", "pm", "ps")
HIDDEN_LAYERS = VISUAL_LAYERS + PROPRIO_LAYERS

# ==========================
# Bloques de la topología
# ==========================
class KernelSpec(BaseModel):
    """Tamaño (alto, ancho) y stride (stride_y, stride_x) de un kernel"""

    size: Tuple[int, int]
    stride: Tuple[int, int] = (1, 1)

    @model_validator(mode="after")
    def _positive(self):
        if min(self.size) < 1 or min(self.stride) < 1:
            raise ValueError(f"kernel inválido: size={self.size} stride={self.stride}")
        return self


class VisualLayerConfig(BaseModel):
    tau: float = Field(..., ge=1.0)
    maps: int = Field(..., ge=1)
    bottom_up: KernelSpec
    recurrent: KernelSpec
    top_down: Optional[KernelSpec] = None
    lateral: Optional[KernelSpec] = None


class ProprioLayerConfig(BaseModel):
    tau: float = Field(..., ge=1.0)
    neurons: int = Field(..., ge=1)


class NetworkConfig(BaseModel):
    """
    Topología completa de las dos vías (tres niveles ocultos cada una).

    Las extensiones de los mapas se derivan de los kernels y se validan
    contra las fórmulas de forma de la convolución válida y transpuesta.
    """

    name: str = "custom"
    version: int = 1
    image_height: int = Field(48, ge=1)
    image_width: int = Field(64, ge=1)
    proprio_groups: int = Field(2, ge=1)
    units_per_group: int = Field(10, ge=1)
    io_tau: float = Field(1.0, ge=1.0)
    output_kernel: KernelSpec
    vf: VisualLayerConfig
    vm: VisualLayerConfig
    vs: VisualLayerConfig
    pf: ProprioLayerConfig
    pm: ProprioLayerConfig
    ps: ProprioLayerConfig

    @property
    def proprio_size(self) -> int:
        return self.proprio_groups * self.units_per_group

    @property
    def groups(self) -> List[int]:
        return [self.units_per_group] * self.proprio_groups

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return (1, self.image_height, self.image_width)

    def visual(self, name: str) -> VisualLayerConfig:
        return getattr(self, name)

    def proprio(self, name: str) -> ProprioLayerConfig:
        return getattr(self, name)

    def tau(self, name: str) -> float:
        return getattr(self, name).tau

    def map_extents(self) -> Dict[str, Tuple[int, int]]:
        extents = {}
        size = (self.image_height, self.image_width)
        for name in VISUAL_LAYERS:
            spec = self.visual(name).bottom_up
            size = valid_extent(size, spec.size, spec.stride)
            extents[name] = size
        return extents

    def state_shape(self, name: str) -> Tuple[int, ...]:
        if name in VISUAL_LAYERS:
            return (self.visual(name).maps,) + tuple(self.map_extents()[name])
        return (self.proprio(name).neurons,)

    @model_validator(mode="after")
    def _check_shapes(self):
        size = (self.image_height, self.image_width)
        extents = {}
        for name in VISUAL_LAYERS:
            spec = self.visual(name).bottom_up
            if any(s < k for s, k in zip(size, spec.size)):
                raise ValueError(f"{name}: kernel ascendente {spec.size} mayor que la entrada {size}")
            size = valid_extent(size, spec.size, spec.stride)
            extents[name] = size
            if tuple(self.visual(name).recurrent.stride) != (1, 1):
                raise ValueError(f"{name}: el kernel recurrente debe tener stride (1, 1)")

        for lower, upper in (("vf", "vm"), ("vm", "vs")):
            td = self.visual(lower).top_down
            if td is None:
                raise ValueError(f"{lower}: falta el kernel descendente desde {upper}")
            back = transposed_extent(extents[upper], td.size, td.stride)
            if tuple(back) != tuple(extents[lower]):
                raise ValueError(
                    f"{lower}: el kernel descendente produce {back}, se esperaba {extents[lower]}")

        lat = self.vs.lateral
        if lat is None or tuple(lat.size) != tuple(extents["vs"]):
            raise ValueError(
                f"vs: el kernel lateral debe cubrir el mapa completo {extents['vs']}, recibió "
                f"{None if lat is None else lat.size}")

        out = transposed_extent(extents["vf"], self.output_kernel.size, self.output_kernel.stride)
        if tuple(out) != (self.image_height, self.image_width):
            raise ValueError(f"V_O: la reconstrucción produce {out}, se esperaba "
                             f"{(self.image_height, self.image_width)}")
        return self


# ==========================
# Entrenamiento y ERS
# ==========================
class TrainConfig(BaseModel):
    epochs: int = Field(40000, ge=0)
    learning_rate: float = Field(0.001, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)
    seed: int = 0
    weight_visual: float = Field(1.0, ge=0.0)
    weight_proprio: float = Field(1.0, ge=0.0)
    checkpoint_every: int = Field(1000, ge=0)


class ErsConfig(BaseModel):
    window: int = Field(30, ge=1)
    iterations: int = Field(50, ge=0)
    learning_rate: float = Field(0.1, gt=0.0)
    modality: Literal["visual", "proprioceptive", "both"] = "visual"
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(1e-8, gt=0.0)


# ==========================
# Carga de presets
# ==========================
def load_network_config(preset: str) -> NetworkConfig:
    """
    Resuelve un nombre de preset ("table1", "desk", "tiny") o una ruta YAML.

    Args:
        preset: nombre o ruta

    Returns:
        NetworkConfig validado
    """
    path = Path(preset)
    if not path.suffix:
        path = PRESETS_DIR / f"{preset}.yaml"
    if not path.exists():
        raise ConfigurationError(f"preset desconocido: {preset}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    try:
        return NetworkConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"preset {path.name} inválido: {e}") from e


def network_config_from_dict(raw: dict) -> NetworkConfig:
    try:
        return NetworkConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"configuración de red inválida: {e}") from e
