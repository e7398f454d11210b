"""
Dinámica de un paso de la red y generación de secuencias.

Orden de evaluación dentro de un paso: V_F, V_M, V_S, V_O y luego P_F, P_M,
P_S, P_O. El término lateral V_S -> P_S usa la activación visual del paso
actual; el término P_S -> V_S usa la activación propioceptiva del paso
anterior.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np

from config.networkConfig import HIDDEN_LAYERS
from network.errors import ConfigurationError, MissingExternalInput, NumericalFault
from network.parameters import LayerState, Parameters
from ops.activations import out_tanh, scaled_tanh, softmax_group
from ops.convolution import conv_same, conv_transposed, conv_valid
from ops.dense import affine

logger = logging.getLogger(__name__)

Entrainment = Literal["vision", "proprioception", "both"]

# modalidad de ERS -> modalidad de entrenamiento sensorial equivalente
ENTRAIN_FOR_MODALITY = {"visual": "vision", "proprioceptive": "proprioception", "both": "both"}


def as_frame_batch(v: np.ndarray) -> np.ndarray:
    """(H, W) o (1, H, W) -> (1, 1, H, W); los lotes ya formados no cambian"""
    v = np.asarray(v, dtype=float)
    while v.ndim < 4:
        v = v[None]
    return v


def as_code_batch(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[None] if p.ndim == 1 else p


def leak(u_prev: np.ndarray, total: np.ndarray, tau: float) -> np.ndarray:
    """u^t = (1 - 1/tau) u^{t-1} + (1/tau) (drive + b)"""
    return (1.0 - 1.0 / tau) * u_prev + (1.0 / tau) * total


def _check_finite(name: str, value: np.ndarray, step: int):
    if not np.all(np.isfinite(value)):
        raise NumericalFault("estado no finito", name=name, step=step)


def forward_step(params: Parameters, state: LayerState, io_in: Tuple[np.ndarray, np.ndarray],
                 step: int = 0) -> Tuple[LayerState, np.ndarray, np.ndarray]:
    """
    Avanza un paso de tiempo.

    Args:
        params: parámetros de la red
        state: estado del paso anterior (lote B)
        io_in: (v_in (B, 1, H, W), p_in (B, P))
        step: índice del paso, sólo para diagnósticos

    Returns:
        (nuevo estado, v_out (B, 1, H, W), p_out (B, P))
    """
    cfg = params.config
    w = params.tensors
    k = params.kernel
    v_in, p_in = io_in
    if v_in.shape[1:] != cfg.image_shape or p_in.shape[-1] != cfg.proprio_size:
        raise ConfigurationError(
            f"forward_step: entradas {v_in.shape} / {p_in.shape} no coinciden con la configuración")
    u_prev, a_prev = state.u, state.act
    u, act = {}, {}

    def settle(name: str, total: np.ndarray):
        u[name] = leak(u_prev[name], total, cfg.tau(name))
        _check_finite(name, u[name], step)
        act[name] = scaled_tanh(u[name])

    # vía visual
    settle("vf", conv_valid(v_in, k("vf.bu"), w["vf.b"])
           + conv_transposed(a_prev["vm"], k("vf.td"))
           + conv_same(a_prev["vf"], k("vf.rec")))
    settle("vm", conv_valid(a_prev["vf"], k("vm.bu"), w["vm.b"])
           + conv_transposed(a_prev["vs"], k("vm.td"))
           + conv_same(a_prev["vm"], k("vm.rec")))
    settle("vs", conv_valid(a_prev["vm"], k("vs.bu"), w["vs.b"])
           + conv_same(a_prev["vs"], k("vs.rec"))
           + conv_transposed(a_prev["ps"][:, :, None, None], k("vs.lat")))
    v_out = out_tanh(conv_transposed(act["vf"], k("vo.k"), w["vo.b"]))
    _check_finite("vo", v_out, step)

    # vía propioceptiva
    settle("pf", affine(w["pf.bu"], p_in, w["pf.b"])
           + affine(w["pf.td"], a_prev["pm"])
           + affine(w["pf.rec"], a_prev["pf"]))
    settle("pm", affine(w["pm.bu"], a_prev["pf"], w["pm.b"])
           + affine(w["pm.td"], a_prev["ps"])
           + affine(w["pm.rec"], a_prev["pm"]))
    lateral = conv_valid(act["vs"], k("ps.lat"))
    settle("ps", affine(w["ps.bu"], a_prev["pm"], w["ps.b"])
           + affine(w["ps.rec"], a_prev["ps"])
           + lateral.reshape(lateral.shape[0], -1))
    p_out = softmax_group(affine(w["po.w"], act["pf"], w["po.b"]), cfg.groups)
    _check_finite("po", p_out, step)

    return LayerState(u, act), v_out, p_out


# ==========================
# Desenrollado
# ==========================
@dataclass
class Rollout:
    """
    Registro completo de un desenrollado, suficiente para BPTT.

    states[0] es el estado inicial; states[t + 1] el estado tras el paso t.
    fed_back_v[t] indica que v_in[t] es v_out[t - 1] (lazo cerrado).
    """

    states: List[LayerState] = field(default_factory=list)
    v_in: List[np.ndarray] = field(default_factory=list)
    p_in: List[np.ndarray] = field(default_factory=list)
    v_out: List[np.ndarray] = field(default_factory=list)
    p_out: List[np.ndarray] = field(default_factory=list)
    fed_back_v: List[bool] = field(default_factory=list)
    fed_back_p: List[bool] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.v_out)

    @property
    def final_state(self) -> LayerState:
        return self.states[-1]

    def outputs(self) -> Tuple[np.ndarray, np.ndarray]:
        """(v_out (B, T, 1, H, W), p_out (B, T, P))"""
        return np.stack(self.v_out, axis=1), np.stack(self.p_out, axis=1)

    def activations(self, layer: str) -> np.ndarray:
        """Activaciones de una capa en los pasos 1..T, aplanadas: (B, T, d)"""
        acts = [s.act[layer].reshape(s.batch, -1) for s in self.states[1:]]
        return np.stack(acts, axis=1)


def unroll(params: Parameters, init_state: LayerState, first_io: Tuple[np.ndarray, np.ndarray],
           steps: int, external_v: Optional[np.ndarray] = None,
           external_p: Optional[np.ndarray] = None, step_offset: int = 0) -> Rollout:
    """
    Desenrolla la red. Cada modalidad entra desde `external_*` (B, T, ...) si se
    entrega; si no, el paso 0 consume `first_io` y los siguientes la predicción
    propia del paso anterior.
    """
    roll = Rollout(states=[init_state])
    v_first, p_first = first_io
    state = init_state
    for t in range(steps):
        if external_v is not None:
            v_in, fb_v = external_v[:, t], False
        elif t == 0:
            v_in, fb_v = as_frame_batch(v_first), False
        else:
            v_in, fb_v = roll.v_out[-1], True
        if external_p is not None:
            p_in, fb_p = external_p[:, t], False
        elif t == 0:
            p_in, fb_p = as_code_batch(p_first), False
        else:
            p_in, fb_p = roll.p_out[-1], True

        state, v_out, p_out = forward_step(params, state, (v_in, p_in), step=step_offset + t)
        roll.states.append(state)
        roll.v_in.append(v_in)
        roll.p_in.append(p_in)
        roll.v_out.append(v_out)
        roll.p_out.append(p_out)
        roll.fed_back_v.append(fb_v)
        roll.fed_back_p.append(fb_p)
    return roll


def generate_closed_loop(params: Parameters, init_state: LayerState,
                         first_io: Tuple[np.ndarray, np.ndarray], steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simulación mental: sólo el primer paso consume datos; luego la red se
    alimenta con sus propias predicciones.

    Returns:
        (v_out (B, T, 1, H, W), p_out (B, T, P))
    """
    if steps < 1:
        raise ConfigurationError(f"generate_closed_loop requiere T >= 1, recibió {steps}")
    return unroll(params, init_state, first_io, steps).outputs()


def _external_length(name: str, seq: Optional[np.ndarray], steps: int):
    if seq is None or seq.shape[1] < steps:
        have = None if seq is None else seq.shape[1]
        raise MissingExternalInput(f"faltan observaciones de {name}: se requieren {steps}, hay {have}")


def open_loop_rollout(params: Parameters, init_state: LayerState,
                      external: Tuple[Optional[np.ndarray], Optional[np.ndarray]],
                      entrain: Entrainment, steps: Optional[int] = None,
                      first_io: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Rollout:
    v_ext, p_ext = external
    v_ext = None if v_ext is None else np.asarray(v_ext, dtype=float)
    p_ext = None if p_ext is None else np.asarray(p_ext, dtype=float)
    use_v = entrain in ("vision", "both")
    use_p = entrain in ("proprioception", "both")
    if entrain not in ("vision", "proprioception", "both"):
        raise ConfigurationError(f"modalidad de entrenamiento sensorial desconocida: {entrain}")
    if steps is None:
        source = v_ext if use_v else p_ext
        if source is None:
            raise MissingExternalInput(f"entrain={entrain} sin observaciones externas")
        steps = source.shape[1]
    if use_v:
        _external_length("visión", v_ext, steps)
    if use_p:
        _external_length("propiocepción", p_ext, steps)

    # la modalidad libre arranca con la observación del paso 0 (o first_io)
    first_v = v_ext[:, 0] if v_ext is not None else None
    first_p = p_ext[:, 0] if p_ext is not None else None
    if first_io is not None:
        first_v = first_v if first_v is not None else first_io[0]
        first_p = first_p if first_p is not None else first_io[1]
    if first_v is None or first_p is None:
        raise MissingExternalInput("no hay entrada inicial para la modalidad en lazo cerrado")

    return unroll(params, init_state, (first_v, first_p), steps,
                  external_v=v_ext if use_v else None,
                  external_p=p_ext if use_p else None)


def generate_open_loop(params: Parameters, init_state: LayerState,
                       external: Tuple[Optional[np.ndarray], Optional[np.ndarray]],
                       entrain: Entrainment, steps: Optional[int] = None,
                       first_io: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Entrenamiento sensorial: la modalidad indicada llega desde `external` en
    cada paso, la otra se realimenta con la predicción propia.

    Args:
        external: (frames (B, T, 1, H, W) o None, códigos (B, T, P) o None)
        entrain: "vision", "proprioception" o "both"
        steps: pasos a generar (por defecto la longitud de la modalidad externa)
        first_io: entrada del paso 0 para la modalidad sin datos externos

    Returns:
        (v_out, p_out) con forma (B, T, ...)
    """
    return open_loop_rollout(params, init_state, external, entrain, steps, first_io).outputs()


def zero_state(params: Parameters, batch: int = 1) -> LayerState:
    return LayerState.zeros(params.config, batch)


def state_vector(state: LayerState, layers=HIDDEN_LAYERS) -> np.ndarray:
    """Estado interno del primer elemento del lote, aplanado"""
    return state.flat(layers)[0]
