#!/usr/bin/env python3
"""
Entrenamiento en lazo cerrado por BPTT con Adam.

Cada época es una actualización de lote completo: todas las secuencias del
dataset se desenrollan (agrupadas por largo) desde su estado inicial
aprendible, con el primer cuadro/código observado como entrada del paso 0 y
las predicciones propias como entrada de los pasos siguientes. El objetivo
del paso t es la observación t + 1.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.networkConfig import HIDDEN_LAYERS, NetworkConfig, TrainConfig
from config.settings import RuntimeSettings, get_settings
from data.coding import CodingConfig
from data.gestureSynth import SequencePair
from network.checkpoint import Checkpoint, save_checkpoint
from network.dynamics import Rollout, unroll
from network.errors import ConfigurationError, NumericalFault, TrainingDiverged
from network.parameters import Parameters, init_params
from ops.losses import kl_loss, softmax_kl_logit_grad
from training.bptt import backpropagate
from training.optimizer import AdamState, adam_step

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ["epoch", "E", "E_V", "E_P", "wall_seconds"]


@dataclass
class LossBreakdown:
    """
    total = weight_visual * E_V + weight_proprio * E_P; por secuencia se
    guarda (E, E_V, E_P) con el id de la primitiva como clave.
    """

    total: float = 0.0
    visual: float = 0.0
    proprio: float = 0.0
    per_sequence: Dict[int, Tuple[float, float, float]] = field(default_factory=dict)

    def merge(self, other: "LossBreakdown"):
        self.total += other.total
        self.visual += other.visual
        self.proprio += other.proprio
        self.per_sequence.update(other.per_sequence)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: pd.DataFrame
    output_dir: Optional[Path] = None


# ==========================
# Lotes de observaciones
# ==========================
def observation_batch(sequences: Sequence[SequencePair], config: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apila secuencias del mismo largo en doble precisión.

    Returns:
        (frames (B, T, 1, H, W), códigos (B, T, P)) con cada grupo renormalizado
    """
    steps = {seq.steps for seq in sequences}
    if len(steps) != 1:
        raise ConfigurationError(f"observation_batch: largos distintos {sorted(steps)}")
    for seq in sequences:
        if seq.frames.shape[1:] != (config.image_height, config.image_width):
            raise ConfigurationError(
                f"primitiva {seq.primitive_id}: cuadros {seq.frames.shape[1:]} no coinciden con "
                f"la imagen {(config.image_height, config.image_width)}")
        if seq.codes.shape[1] != config.proprio_size:
            raise ConfigurationError(
                f"primitiva {seq.primitive_id}: códigos de {seq.codes.shape[1]} unidades, "
                f"se esperaban {config.proprio_size}")
    frames = np.stack([seq.frames for seq in sequences]).astype(float)[:, :, None]
    codes = np.stack([seq.codes for seq in sequences]).astype(float)
    groups = codes.reshape(codes.shape[:-1] + (config.proprio_groups, config.units_per_group))
    codes = (groups / groups.sum(axis=-1, keepdims=True)).reshape(codes.shape)
    return frames, codes


def sequence_rows(params: Parameters, sequences: Sequence[SequencePair]) -> List[int]:
    """Fila del estado inicial de cada secuencia (por id de primitiva)"""
    rows = []
    for seq in sequences:
        try:
            rows.append(params.sequence_ids.index(seq.primitive_id))
        except ValueError:
            raise ConfigurationError(
                f"no hay estado inicial para la primitiva {seq.primitive_id}") from None
    return rows


def _closed_loop_rollout(params: Parameters, rows: List[int], frames: np.ndarray,
                         codes: np.ndarray) -> Rollout:
    init = params.initial_state(rows)
    return unroll(params, init, (frames[:, 0], codes[:, 0]), frames.shape[1] - 1)


def _batch_losses(roll: Rollout, frames: np.ndarray, codes: np.ndarray, ids: List[int],
                  weight_visual: float, weight_proprio: float):
    v_out, p_out = roll.outputs()
    v_target, p_target = frames[:, 1:], codes[:, 1:]
    diff = v_out - v_target
    breakdown = LossBreakdown()
    for b, pid in enumerate(ids):
        e_v = float(np.sum(diff[b] * diff[b]))
        e_p, _, _ = kl_loss(p_target[b], p_out[b])
        e = weight_visual * e_v + weight_proprio * e_p
        breakdown.per_sequence[pid] = (e, e_v, e_p)
        breakdown.visual += e_v
        breakdown.proprio += e_p
        breakdown.total += e
    grad_v = weight_visual * 2.0 * diff
    grad_p = weight_proprio * softmax_kl_logit_grad(p_target, p_out)
    return breakdown, grad_v, grad_p, (v_out, p_out)


def sequence_loss(params: Parameters, sequence: SequencePair, weight_visual: float = 1.0,
                  weight_proprio: float = 1.0) -> Tuple[LossBreakdown, Tuple[np.ndarray, np.ndarray]]:
    """
    Pérdida de una secuencia desenrollada en lazo cerrado.

    Returns:
        (LossBreakdown, (v_out (T-1, 1, H, W), p_out (T-1, P)))
    """
    if sequence.steps < 2:
        raise ConfigurationError(f"sequence_loss requiere T >= 2, la primitiva "
                                 f"{sequence.primitive_id} tiene {sequence.steps}")
    frames, codes = observation_batch([sequence], params.config)
    rows = sequence_rows(params, [sequence])
    roll = _closed_loop_rollout(params, rows, frames, codes)
    breakdown, _, _, (v_out, p_out) = _batch_losses(roll, frames, codes, [sequence.primitive_id],
                                                    weight_visual, weight_proprio)
    return breakdown, (v_out[0], p_out[0])


def _chunk_gradients(params: Parameters, chunk: List[SequencePair], weight_visual: float,
                     weight_proprio: float):
    frames, codes = observation_batch(chunk, params.config)
    rows = sequence_rows(params, chunk)
    ids = [seq.primitive_id for seq in chunk]
    roll = _closed_loop_rollout(params, rows, frames, codes)
    breakdown, grad_v, grad_p, _ = _batch_losses(roll, frames, codes, ids, weight_visual, weight_proprio)
    result = backpropagate(params, roll, grad_v, grad_p, weights=True)
    return rows, breakdown, result


def bptt_gradients(params: Parameters, dataset: Sequence[SequencePair], weight_visual: float = 1.0,
                   weight_proprio: float = 1.0, threads: int = 1) -> Tuple[Dict[str, np.ndarray], LossBreakdown]:
    """
    Gradientes exactos de la pérdida total respecto a todos los aprendibles.

    Las secuencias se agrupan por largo; con threads > 1 cada grupo se reparte
    en bloques que se evalúan en paralelo y se reducen en orden fijo.

    Returns:
        (gradientes con las mismas claves que params.tensors, LossBreakdown)
    """
    if len(dataset) == 0:
        raise ConfigurationError("bptt_gradients requiere al menos una secuencia")
    grads = params.zeros_like()
    total = LossBreakdown()

    groups: Dict[int, List[SequencePair]] = {}
    for seq in dataset:
        if seq.steps >= 2:
            groups.setdefault(seq.steps, []).append(seq)

    chunks: List[List[SequencePair]] = []
    for members in groups.values():
        n = max(1, min(threads, len(members)))
        for part in np.array_split(np.arange(len(members)), n):
            chunks.append([members[i] for i in part])

    def run(chunk):
        return _chunk_gradients(params, chunk, weight_visual, weight_proprio)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]

    for rows, breakdown, result in results:
        total.merge(breakdown)
        for name, value in result.weights.items():
            grads[name] += value
        for layer in HIDDEN_LAYERS:
            np.add.at(grads[f"init.{layer}"], rows, result.initial_u[layer])

    for name, value in grads.items():
        if not np.all(np.isfinite(value)):
            sequence = None
            if name.startswith("init."):
                bad = np.where(~np.isfinite(value.reshape(value.shape[0], -1)).all(axis=1))[0]
                sequence = params.sequence_ids[int(bad[0])] if bad.size else None
            raise NumericalFault("gradiente no finito", name=name, sequence=sequence)
    return grads, total


# ==========================
# Bucle de entrenamiento
# ==========================
def train(dataset: Sequence[SequencePair], train_config: TrainConfig, net_config: NetworkConfig,
          out_dir: Optional[Path] = None, params: Optional[Parameters] = None,
          coding: Optional[CodingConfig] = None, settings: Optional[RuntimeSettings] = None,
          progress: bool = True) -> TrainResult:
    """
    Entrena todos los aprendibles, incluidos los estados iniciales por secuencia.

    Se registran epochs + 1 filas de pérdida: la fila e es la pérdida de los
    parámetros tras e actualizaciones.

    Args:
        dataset: secuencias de entrenamiento
        train_config: hiperparámetros
        net_config: topología
        out_dir: directorio para checkpoints y loss.csv (None = no escribe)
        params: parámetros iniciales (None = init_params con la semilla)
        coding: código poblacional a registrar en el checkpoint
        settings: variables de entorno (hilos, tiempo de reloj)
        progress: mostrar barra de progreso

    Returns:
        TrainResult con el checkpoint final y el historial de pérdidas
    """
    settings = settings or get_settings()
    sequences = list(dataset)
    if not sequences:
        raise ConfigurationError("train requiere un dataset no vacío")
    ids = [seq.primitive_id for seq in sequences]
    if params is None:
        params = init_params(net_config, train_config.seed, n_sequences=len(ids), sequence_ids=ids)
    for seq in sequences:
        observation_batch([seq], net_config)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    adam = AdamState.for_tensors(params.tensors)
    records = []
    start = time.perf_counter()
    last_good: Optional[Checkpoint] = None
    bar = tqdm(range(train_config.epochs + 1), desc="entrenamiento", disable=not progress)
    for epoch in bar:
        try:
            grads, loss = bptt_gradients(params, sequences, train_config.weight_visual,
                                         train_config.weight_proprio, settings.threads)
            if not np.isfinite(loss.total):
                raise NumericalFault("pérdida no finita", step=epoch)
        except NumericalFault as e:
            path = None
            if out_dir is not None and last_good is not None:
                path = out_dir / "checkpoint_last_good.pvmd"
                save_checkpoint(path, last_good)
            _write_history(records, out_dir)
            logger.error("divergencia en la época %d: %s", epoch, e)
            raise TrainingDiverged(str(e), epoch=epoch,
                                   last_good_checkpoint=None if path is None else str(path)) from e

        wall = time.perf_counter() - start if settings.record_wall_time else 0.0
        records.append({"epoch": epoch, "E": loss.total, "E_V": loss.visual, "E_P": loss.proprio,
                        "wall_seconds": wall})
        last_good = Checkpoint(params.copy(), epoch=epoch, coding=coding)
        bar.set_postfix(E=f"{loss.total:.4g}")
        if epoch % 100 == 0:
            logger.info("época %d: E=%.6g E_V=%.6g E_P=%.6g", epoch, loss.total, loss.visual, loss.proprio)

        if (out_dir is not None and train_config.checkpoint_every > 0 and epoch > 0
                and epoch % train_config.checkpoint_every == 0 and epoch < train_config.epochs):
            save_checkpoint(out_dir / f"checkpoint_e{epoch:06d}.pvmd", last_good)
        if epoch == train_config.epochs:
            break
        adam_step(params.tensors, grads, adam, train_config.learning_rate,
                  train_config.beta1, train_config.beta2, train_config.epsilon)

    final = Checkpoint(params, epoch=train_config.epochs, coding=coding)
    history = _write_history(records, out_dir)
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint.pvmd", final)
    return TrainResult(checkpoint=final, history=history, output_dir=out_dir)


def _write_history(records: List[dict], out_dir: Optional[Path]) -> pd.DataFrame:
    history = pd.DataFrame(records, columns=LOSS_COLUMNS)
    if out_dir is not None:
        history.to_csv(out_dir / "loss.csv", index=False)
    return history


def dataset_loss(params: Parameters, dataset: Sequence[SequencePair], weight_visual: float = 1.0,
                 weight_proprio: float = 1.0) -> LossBreakdown:
    """Pérdida total sin paso hacia atrás (secuencias de largo 1 no aportan)."""
    groups: Dict[int, List[SequencePair]] = {}
    for seq in dataset:
        if seq.steps >= 2:
            groups.setdefault(seq.steps, []).append(seq)
    total = LossBreakdown()
    for members in groups.values():
        frames, codes = observation_batch(members, params.config)
        roll = _closed_loop_rollout(params, sequence_rows(params, members), frames, codes)
        breakdown, _, _, _ = _batch_losses(roll, frames, codes, [s.primitive_id for s in members],
                                           weight_visual, weight_proprio)
        total.merge(breakdown)
    return total
