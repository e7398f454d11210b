#!/usr/bin/env python3
"""
Esquema de regresión del error (ERS) para inferir la intención en línea.

En cada paso t se re-ejecuta en lazo cerrado una ventana temporal que empieza
en s0 = max(0, t - W), desde el estado interno U_{s0} de las seis capas
ocultas, y sólo U_{s0} se ajusta con Adam para minimizar el error de
predicción de la modalidad observada. Los pesos nunca se modifican.

Convenciones de la ventana:
    - el paso j de la ventana consume la entrada s0 + j y predice la
      observación s0 + j + 1; la ventana tiene min(W, t) pasos
    - el primer paso consume la predicción guardada del paso anterior a la
      ventana o, si s0 = 0, la primera observación del flujo
    - la salida publicada en t es un paso adicional en lazo cerrado que
      predice la observación t + 1
    - al deslizar, el nuevo U es un paso hacia adelante desde el U optimizado
      y los momentos de Adam vuelven a cero

Con cero iteraciones no hay ventana: cada paso consume la modalidad observada
y realimenta la otra con la predicción anterior, desde el estado arrastrado.
Es el entrenamiento sensorial paso a paso.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.networkConfig import HIDDEN_LAYERS, ErsConfig
from network.dynamics import ENTRAIN_FOR_MODALITY, Rollout, forward_step, unroll
from network.errors import ConfigurationError, NumericalFault
from network.parameters import LayerState, Parameters
from ops.losses import kl_loss, softmax_kl_logit_grad
from training.bptt import backpropagate
from training.optimizer import AdamState, adam_step

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "window_len", "loss_round0", "loss_final", "E_V", "E_P", "state_offset"]

# tolerancia bajo la cual un grupo del código se considera ya normalizado
NORMALIZED_TOL = 1e-12


@dataclass
class WindowBuffer:
    """
    Estado de la ventana deslizante (lote 1).

    frames[i] y codes[i] son las observaciones s0 + i; entry_io es la entrada
    del primer paso de la ventana.
    """

    window: int
    start: int
    start_state: LayerState
    entry_io: Optional[Tuple[np.ndarray, np.ndarray]] = None
    frames: List[np.ndarray] = field(default_factory=list)
    codes: List[np.ndarray] = field(default_factory=list)
    adam: Optional[AdamState] = None
    prediction: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def create(cls, params: Parameters, window: int,
               initial_state: Optional[LayerState] = None) -> "WindowBuffer":
        state = initial_state.copy() if initial_state is not None else LayerState.zeros(params.config, 1)
        return cls(window=window, start=0, start_state=state)

    @property
    def t(self) -> int:
        """Índice de la última observación recibida"""
        return self.start + len(self.frames) - 1

    @property
    def length(self) -> int:
        return max(0, len(self.frames) - 1)

    def reset_adam(self):
        self.adam = AdamState.for_tensors(self.start_state.u)


@dataclass
class WindowLoss:
    total: float
    visual: float
    proprio: float


@dataclass
class ErsResult:
    v_out: np.ndarray                      # (T, 1, H, W), predicción de t + 1
    p_out: np.ndarray                      # (T, P)
    trace: pd.DataFrame
    window_states: Dict[str, np.ndarray]   # capa -> (T, ...) U de inicio de ventana
    activations: Dict[str, np.ndarray]     # capa -> (T, d) activación publicada en t
    violations: int = 0

    def state_matrix(self, layers=HIDDEN_LAYERS) -> np.ndarray:
        steps = next(iter(self.window_states.values())).shape[0]
        return np.concatenate([self.window_states[n].reshape(steps, -1) for n in layers], axis=1)


def _window_loss(roll: Rollout, buffer: WindowBuffer, modality: str):
    v_out, p_out = roll.outputs()
    v_target = np.stack(buffer.frames[1:], axis=1)
    p_target = np.stack(buffer.codes[1:], axis=1)
    diff = v_out - v_target
    e_v = float(np.sum(diff * diff))
    e_p, _, _ = kl_loss(p_target, p_out)
    grad_v = 2.0 * diff if modality in ("visual", "both") else None
    grad_p = softmax_kl_logit_grad(p_target, p_out) if modality in ("proprioceptive", "both") else None
    total = {"visual": e_v, "proprioceptive": e_p, "both": e_v + e_p}[modality]
    return WindowLoss(total, e_v, e_p), grad_v, grad_p


def _forward_window(params: Parameters, buffer: WindowBuffer) -> Rollout:
    # las activaciones se recalculan desde u, que Adam modifica en su lugar
    buffer.start_state = LayerState.from_internal(buffer.start_state.u)
    return unroll(params, buffer.start_state, buffer.entry_io, buffer.length, step_offset=buffer.start)


def _entrain_step(params: Parameters, buffer: WindowBuffer, observation: Tuple[np.ndarray, np.ndarray],
                  config: ErsConfig):
    v_obs, p_obs = observation
    t = buffer.t + 1
    buffer.start, buffer.frames, buffer.codes = t, [v_obs], [p_obs]
    entrain = ENTRAIN_FOR_MODALITY[config.modality]

    e_v = e_p = 0.0
    if buffer.prediction is None:
        v_in, p_in = v_obs, p_obs
    else:
        v_prev, p_prev = buffer.prediction
        v_in = v_obs if entrain in ("vision", "both") else v_prev
        p_in = p_obs if entrain in ("proprioception", "both") else p_prev
        # error de la predicción publicada en t - 1
        diff = v_prev - v_obs
        e_v = float(np.sum(diff * diff))
        e_p, _, _ = kl_loss(p_obs, p_prev)

    state, v_pred, p_pred = forward_step(params, buffer.start_state, (v_in, p_in), step=t)
    buffer.start_state = state
    buffer.prediction = (v_pred, p_pred)
    total = {"visual": e_v, "proprioceptive": e_p, "both": e_v + e_p}[config.modality]
    row = {"t": t, "window_len": 0, "loss_round0": total, "loss_final": total, "E_V": e_v, "E_P": e_p}
    return buffer, (v_pred, p_pred), row, (state, state)


def ers_step(params: Parameters, buffer: WindowBuffer, observation: Tuple[np.ndarray, np.ndarray],
             config: ErsConfig):
    """
    Procesa la observación del paso t.

    Con config.iterations = 0 el paso es de entrenamiento sensorial: la
    modalidad observada entra desde `observation`, la otra desde la predicción
    anterior, y el estado publicado es el estado arrastrado tras el paso.

    Args:
        params: parámetros entrenados (sólo lectura)
        buffer: ventana actual
        observation: (cuadro (1, 1, H, W), código (1, P)) del paso t
        config: ventana, iteraciones, tasa y modalidad

    Returns:
        (buffer, (v_pred, p_pred) de la observación t + 1, fila de traza, estado publicado)
    """
    if config.iterations == 0:
        return _entrain_step(params, buffer, observation, config)
    v_obs, p_obs = observation
    buffer.frames.append(v_obs)
    buffer.codes.append(p_obs)
    if buffer.entry_io is None:
        buffer.entry_io = (v_obs, p_obs)
    if buffer.adam is None:
        buffer.reset_adam()
    t = buffer.t

    loss0 = final = WindowLoss(0.0, 0.0, 0.0)
    roll = None
    if buffer.length > 0:
        for round_ in range(config.iterations):
            roll = _forward_window(params, buffer)
            loss, grad_v, grad_p = _window_loss(roll, buffer, config.modality)
            if not np.isfinite(loss.total):
                raise NumericalFault("pérdida de ventana no finita", name="ers", step=t)
            if round_ == 0:
                loss0 = loss
            back = backpropagate(params, roll, grad_v, grad_p, weights=False)
            adam_step(buffer.start_state.u, back.initial_u, buffer.adam, config.learning_rate,
                      config.beta1, config.beta2, config.epsilon)
        # re-forward final con el U optimizado
        roll = _forward_window(params, buffer)
        final, _, _ = _window_loss(roll, buffer, config.modality)
        if not np.isfinite(final.total):
            raise NumericalFault("pérdida de ventana no finita", name="ers", step=t)

    window_state = buffer.start_state.copy()
    if roll is None:
        last_state, look_in = buffer.start_state, buffer.entry_io
    else:
        last_state, look_in = roll.final_state, (roll.v_out[-1], roll.p_out[-1])
    published, v_pred, p_pred = forward_step(params, last_state, look_in, step=t)

    row = {"t": t, "window_len": buffer.length, "loss_round0": loss0.total,
           "loss_final": final.total, "E_V": final.visual, "E_P": final.proprio}

    # deslizamiento: la ventana del paso t + 1 empieza en max(0, t + 1 - W)
    if t + 1 - config.window > buffer.start:
        buffer.start_state = roll.states[1]
        buffer.entry_io = (roll.v_out[0], roll.p_out[0])
        buffer.frames.pop(0)
        buffer.codes.pop(0)
        buffer.start += 1
        buffer.reset_adam()
    return buffer, (v_pred, p_pred), row, (window_state, published)


def prepare_stream(frames: np.ndarray, codes: np.ndarray, params: Parameters):
    """Cuadros (T, 1, H, W) y códigos (T, P) renormalizados por grupo, en float64"""
    frames = np.asarray(frames, dtype=float)
    codes = np.asarray(codes, dtype=float)
    if frames.ndim == 3:
        frames = frames[:, None]
    cfg = params.config
    if frames.shape[1:] != cfg.image_shape or codes.shape[1:] != (cfg.proprio_size,):
        raise ConfigurationError(f"flujo con cuadros {frames.shape} / códigos {codes.shape} "
                                 f"incompatibles con la red")
    if frames.shape[0] != codes.shape[0]:
        raise ConfigurationError("el flujo tiene distinta cantidad de cuadros y códigos")
    groups = codes.reshape(codes.shape[0], cfg.proprio_groups, cfg.units_per_group)
    sums = groups.sum(axis=-1, keepdims=True)
    # los grupos ya normalizados (p. ej. salidas propias) se conservan bit a bit
    groups = np.where(np.abs(sums - 1.0) > NORMALIZED_TOL, groups / sums, groups)
    return frames, groups.reshape(codes.shape)


def _trace_frame(rows: List[dict], states: Dict[str, np.ndarray]) -> pd.DataFrame:
    d = sum(int(np.prod(states[n].shape[1:])) for n in HIDDEN_LAYERS)
    for row in rows:
        row["state_offset"] = row["t"] * d * 4
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def run_ers(params: Parameters, frames: np.ndarray, codes: np.ndarray, config: ErsConfig,
            initial_state: Optional[LayerState] = None, progress: bool = True) -> ErsResult:
    """
    Recorre un flujo de observaciones con ERS.

    Con iterations = 0 no hay optimización: cada paso es entrenamiento
    sensorial de la modalidad observada y el resultado coincide con
    generate_open_loop desde el mismo estado inicial.

    Args:
        params: parámetros entrenados (no se modifican)
        frames: (T, H, W) o (T, 1, H, W) en [-1, 1]
        codes: (T, P) códigos poblacionales
        config: ErsConfig
        initial_state: estado de arranque (por defecto neutro, todo cero)
        progress: barra de progreso

    Returns:
        ErsResult con predicciones, traza y trayectoria de U
    """
    frames, codes = prepare_stream(frames, codes, params)
    buffer = WindowBuffer.create(params, config.window, initial_state)
    v_out, p_out, rows = [], [], []
    states = {n: [] for n in HIDDEN_LAYERS}
    acts = {n: [] for n in HIDDEN_LAYERS}
    violations = 0
    for t in tqdm(range(frames.shape[0]), desc=f"ERS ({config.modality})", disable=not progress):
        buffer, (v_pred, p_pred), row, (window_state, published) = ers_step(
            params, buffer, (frames[t][None], codes[t][None]), config)
        if row["window_len"] > 0 and row["loss_final"] > row["loss_round0"]:
            violations += 1
        v_out.append(v_pred[0])
        p_out.append(p_pred[0])
        rows.append(row)
        for n in HIDDEN_LAYERS:
            states[n].append(window_state.u[n][0])
            acts[n].append(published.act[n][0].reshape(-1))
    if violations:
        logger.warning("ERS: en %d pasos la pérdida final superó a la de la ronda 0", violations)
    states = {n: np.stack(v) for n, v in states.items()}
    return ErsResult(np.stack(v_out), np.stack(p_out), _trace_frame(rows, states), states,
                     {n: np.stack(v) for n, v in acts.items()}, violations)


def write_ers_outputs(result: ErsResult, out_dir: Path) -> Tuple[Path, Path]:
    """
    Escribe la traza CSV y el archivo lateral float32 con U por paso.

    Returns:
        (ruta de trace.csv, ruta de states.f32)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    states_path = out_dir / "states.f32"
    result.trace.to_csv(trace_path, index=False)
    result.state_matrix().astype("<f4").tofile(states_path)
    return trace_path, states_path


def read_state_sidecar(path: Path, params: Parameters) -> Dict[str, np.ndarray]:
    """Lee states.f32 y lo separa por capa usando la topología de la red"""
    raw = np.fromfile(path, dtype="<f4").astype(float)
    sizes = [int(np.prod(params.config.state_shape(n))) for n in HIDDEN_LAYERS]
    d = sum(sizes)
    if raw.size % d:
        raise ConfigurationError(f"{Path(path).name}: {raw.size} valores no son múltiplo de {d}")
    matrix = raw.reshape(-1, d)
    out, start = {}, 0
    for name, size in zip(HIDDEN_LAYERS, sizes):
        out[name] = matrix[:, start:start + size].reshape((-1,) + params.config.state_shape(name))
        start += size
    return out
