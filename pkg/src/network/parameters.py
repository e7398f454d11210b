"""
Parámetros aprendibles y estado por capa de la red visuo-propioceptiva.

Nombres de tensores:
    <capa>.bu   conexión ascendente        <capa>.td   conexión descendente
    <capa>.rec  conexión recurrente        <capa>.lat  conexión lateral V_S <-> P_S
    <capa>.b    bias                       vo.k / po.w pesos de salida
    init.<capa> estados internos iniciales, uno por secuencia de entrenamiento
"""

from dataclasses import dataclass, field
from math import ceil, sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.networkConfig import HIDDEN_LAYERS, PROPRIO_LAYERS, VISUAL_LAYERS, NetworkConfig
from config.randomStreams import stream_rng
from network.errors import ConfigurationError
from ops.activations import scaled_tanh
from ops.convolution import Kernel4


@dataclass(frozen=True)
class TensorSpec:
    name: str
    shape: Tuple[int, ...]
    stride: Tuple[int, int] = (1, 1)
    fan_in: int = 1
    kind: str = "weight"  # weight | bias | init


def tensor_specs(config: NetworkConfig) -> List[TensorSpec]:
    """Lista ordenada de los tensores de pesos y biases (sin estados iniciales)."""
    ext = config.map_extents()
    m = {name: config.visual(name).maps for name in VISUAL_LAYERS}
    n = {name: config.proprio(name).neurons for name in PROPRIO_LAYERS}
    p_size = config.proprio_size

    def conv(name, out_maps, in_maps, spec):
        kh, kw = spec.size
        return TensorSpec(name, (out_maps, in_maps, kh, kw), tuple(spec.stride), in_maps * kh * kw)

    def convt(name, out_maps, in_maps, spec, in_extent):
        # número de contribuciones que recibe cada píxel de salida
        kh, kw = spec.size
        sy, sx = spec.stride
        taps = min(ceil(kh / sy), in_extent[0]) * min(ceil(kw / sx), in_extent[1])
        return TensorSpec(name, (out_maps, in_maps, kh, kw), tuple(spec.stride), out_maps * taps)

    def dense(name, rows, cols):
        return TensorSpec(name, (rows, cols), fan_in=cols)

    def bias(name, size):
        return TensorSpec(name, (size,), kind="bias")

    vf, vm, vs = config.vf, config.vm, config.vs
    return [
        conv("vf.bu", m["vf"], 1, vf.bottom_up),
        convt("vf.td", m["vm"], m["vf"], vf.top_down, ext["vm"]),
        conv("vf.rec", m["vf"], m["vf"], vf.recurrent),
        bias("vf.b", m["vf"]),
        conv("vm.bu", m["vm"], m["vf"], vm.bottom_up),
        convt("vm.td", m["vs"], m["vm"], vm.top_down, ext["vs"]),
        conv("vm.rec", m["vm"], m["vm"], vm.recurrent),
        bias("vm.b", m["vm"]),
        conv("vs.bu", m["vs"], m["vm"], vs.bottom_up),
        conv("vs.rec", m["vs"], m["vs"], vs.recurrent),
        convt("vs.lat", n["ps"], m["vs"], vs.lateral, (1, 1)),
        bias("vs.b", m["vs"]),
        convt("vo.k", m["vf"], 1, config.output_kernel, ext["vf"]),
        bias("vo.b", 1),
        dense("pf.bu", n["pf"], p_size),
        dense("pf.td", n["pf"], n["pm"]),
        dense("pf.rec", n["pf"], n["pf"]),
        bias("pf.b", n["pf"]),
        dense("pm.bu", n["pm"], n["pf"]),
        dense("pm.td", n["pm"], n["ps"]),
        dense("pm.rec", n["pm"], n["pm"]),
        bias("pm.b", n["pm"]),
        dense("ps.bu", n["ps"], n["pm"]),
        dense("ps.rec", n["ps"], n["ps"]),
        conv("ps.lat", n["ps"], m["vs"], vs.lateral),
        bias("ps.b", n["ps"]),
        dense("po.w", p_size, n["pf"]),
        bias("po.b", p_size),
    ]


# ==========================
# Estado por capa
# ==========================
@dataclass
class LayerState:
    """
    Estados internos u y activaciones (v visual, y propioceptiva) de las seis
    capas ocultas en un paso. Cada arreglo lleva un eje inicial de lote.
    """

    u: Dict[str, np.ndarray]
    act: Dict[str, np.ndarray]

    @classmethod
    def from_internal(cls, u: Dict[str, np.ndarray]) -> "LayerState":
        return cls(u=dict(u), act={name: scaled_tanh(value) for name, value in u.items()})

    @classmethod
    def zeros(cls, config: NetworkConfig, batch: int = 1) -> "LayerState":
        return cls.from_internal({name: np.zeros((batch,) + config.state_shape(name))
                                  for name in HIDDEN_LAYERS})

    @property
    def batch(self) -> int:
        return next(iter(self.u.values())).shape[0]

    def copy(self) -> "LayerState":
        return LayerState({k: v.copy() for k, v in self.u.items()},
                          {k: v.copy() for k, v in self.act.items()})

    def flat(self, layers=HIDDEN_LAYERS) -> np.ndarray:
        """Estados internos concatenados (lote, d)"""
        return np.concatenate([self.u[name].reshape(self.batch, -1) for name in layers], axis=1)


# ==========================
# Parámetros
# ==========================
@dataclass
class Parameters:
    config: NetworkConfig
    tensors: Dict[str, np.ndarray]
    sequence_ids: List[int] = field(default_factory=list)
    strides: Dict[str, Tuple[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.strides = {spec.name: spec.stride for spec in tensor_specs(self.config)}

    @property
    def n_sequences(self) -> int:
        return self.tensors[f"init.{HIDDEN_LAYERS[0]}"].shape[0]

    def weight_names(self) -> List[str]:
        return [name for name in self.tensors if not name.startswith("init.")]

    def init_names(self) -> List[str]:
        return [name for name in self.tensors if name.startswith("init.")]

    def kernel(self, name: str) -> Kernel4:
        return Kernel4(self.tensors[name], self.strides[name])

    def initial_state(self, indices) -> LayerState:
        """Estado inicial (lote) de las secuencias indicadas"""
        idx = np.atleast_1d(np.asarray(indices, dtype=int))
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_sequences):
            raise ConfigurationError(f"índice de secuencia fuera de rango: {idx.tolist()}")
        return LayerState.from_internal({name: self.tensors[f"init.{name}"][idx].copy()
                                         for name in HIDDEN_LAYERS})

    def copy(self) -> "Parameters":
        return Parameters(self.config, {k: v.copy() for k, v in self.tensors.items()},
                          list(self.sequence_ids))

    def zeros_like(self) -> Dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


def init_params(config: NetworkConfig, seed: int, n_sequences: int = 1,
                sequence_ids: Optional[List[int]] = None) -> Parameters:
    """
    Inicializa kernels y pesos en U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases y
    estados iniciales en cero (valores neutros).

    Args:
        config: topología validada
        seed: semilla; el flujo "params" se deriva de ella
        n_sequences: cantidad de estados iniciales (uno por secuencia)
        sequence_ids: identificadores de primitiva de cada estado inicial

    Returns:
        Parameters en doble precisión
    """
    rng = stream_rng(seed, "params")
    tensors: Dict[str, np.ndarray] = {}
    for spec in tensor_specs(config):
        if spec.kind == "bias":
            tensors[spec.name] = np.zeros(spec.shape)
        else:
            limit = 1.0 / sqrt(spec.fan_in)
            tensors[spec.name] = rng.uniform(-limit, limit, size=spec.shape)
    for name in HIDDEN_LAYERS:
        tensors[f"init.{name}"] = np.zeros((n_sequences,) + config.state_shape(name))
    ids = list(sequence_ids) if sequence_ids is not None else list(range(n_sequences))
    if len(ids) != n_sequences:
        raise ConfigurationError("sequence_ids debe tener un elemento por secuencia")
    return Parameters(config, tensors, ids)
