#!/usr/bin/env python3
"""
Síntesis de gestos de saludo con dos brazos: trayectorias articulares,
cuadros de video y códigos propioceptivos.

Reemplaza la sesión de tutoría con el robot: cada primitiva es un par
visuo-propioceptivo (frames, ángulos, códigos) generado de forma
determinista a partir de su GestureSpec.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from colorama import Fore, Style, init
from pydantic import BaseModel, Field, ValidationError, model_validator

from config.randomStreams import stream_rng
from data.coding import CodingConfig, decode_joints, encode_joints
from data.rendering import render_gray, gray_to_unit
from network.errors import ConfigurationError

init(autoreset=True)
logger = logging.getLogger(__name__)

GESTURES_FILE = Path(__file__).resolve().parents[1] / "config" / "presets" / "gestures.yaml"

# ==========================
# Configuración
# ==========================
class GestureSpec(BaseModel):
    """
    Una primitiva de la taxonomía. period, phase_offset y steps son
    opcionales: en None se toman de la GestureConfig que la contiene.
    """

    id: int = Field(..., ge=0)
    lead: Literal["left", "right", "both"]
    amp_left: Literal[0.0, 0.5, 1.0]
    amp_right: Literal[0.0, 0.5, 1.0]
    allow_null: bool = False
    period: Optional[int] = Field(None, ge=2)
    phase_offset: Optional[int] = Field(None, ge=0)
    steps: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _moves(self):
        if self.amp_left == 0.0 and self.amp_right == 0.0 and not self.allow_null:
            raise ValueError(f"primitiva {self.id}: gesto nulo sin allow_null")
        return self

    def timing(self, config: "GestureConfig") -> Tuple[int, int, int]:
        """(period, phase_offset, steps) efectivos de la primitiva"""
        return (config.period if self.period is None else self.period,
                config.phase_offset if self.phase_offset is None else self.phase_offset,
                config.steps if self.steps is None else self.steps)


class GestureConfig(BaseModel):
    """Parámetros compartidos por toda la taxonomía de gestos"""

    version: int = 1
    joint_min: float = -1.0
    joint_max: float = 1.0
    home: float = 0.0
    full_swing: float = Field(0.8, gt=0.0)
    period: int = Field(20, ge=2)
    phase_offset: int = Field(5, ge=0)
    steps: int = Field(100, ge=1)
    image_height: int = 48
    image_width: int = 64
    coding: CodingConfig = CodingConfig()
    primitives: List[GestureSpec] = []
    desk_subset: List[int] = []
    desk_steps: int = 40
    # ruido opcional (desactivado por defecto) sobre cuadros y ángulos
    frame_noise: float = Field(0.0, ge=0.0)
    joint_noise: float = Field(0.0, ge=0.0)

    @model_validator(mode="after")
    def _consistent(self):
        half = self.full_swing / 2.0
        if not (self.joint_min <= self.home - half and self.home + half <= self.joint_max):
            raise ValueError("el barrido completo no cabe en el rango articular")
        ids = [p.id for p in self.primitives]
        if len(set(ids)) != len(ids):
            raise ValueError(f"ids de primitivas repetidos: {ids}")
        combos = {(p.lead, p.amp_left, p.amp_right) + p.timing(self)[:2] for p in self.primitives}
        if len(combos) != len(self.primitives):
            raise ValueError("dos primitivas comparten (lead, amp_left, amp_right, period, phase_offset)")
        if (self.coding.joint_min, self.coding.joint_max) != (self.joint_min, self.joint_max):
            raise ValueError("el rango del código poblacional debe coincidir con el rango articular")
        unknown = set(self.desk_subset) - set(ids)
        if unknown:
            raise ValueError(f"desk_subset con ids desconocidos: {sorted(unknown)}")
        return self

    @property
    def joint_range(self):
        return (self.joint_min, self.joint_max)

    def primitive(self, pid: int) -> GestureSpec:
        for spec in self.primitives:
            if spec.id == pid:
                return spec
        raise ConfigurationError(f"primitiva desconocida: {pid}")

    def with_image(self, height: int, width: int) -> "GestureConfig":
        return self.model_copy(update={"image_height": height, "image_width": width})


def load_gesture_config(path: Optional[Path] = None, **overrides) -> GestureConfig:
    """
    Carga la taxonomía de gestos (por defecto la del repositorio).

    Args:
        path: YAML alternativo
        **overrides: campos a reemplazar (p. ej. steps, image_height)
    """
    path = Path(path) if path is not None else GESTURES_FILE
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return GestureConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"configuración de gestos inválida: {e}") from e


# ==========================
# Pares visuo-propioceptivos
# ==========================
@dataclass
class SequencePair:
    """
    frames (T, alto, ancho), joints (T, 2) y codes (T, 20) en float32.

    Las secuencias de prueba concatenadas llevan primitive_id = -1 y un
    schedule con la primitiva vigente en cada paso.
    """

    primitive_id: int
    frames: np.ndarray
    joints: np.ndarray
    codes: np.ndarray
    spec: Optional[GestureSpec] = None
    schedule: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return self.frames.shape[0]


@dataclass
class GestureDataset:
    sequences: List[SequencePair]
    coding: CodingConfig
    image_height: int
    image_width: int
    meta: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def by_id(self, pid: int) -> SequencePair:
        for seq in self.sequences:
            if seq.primitive_id == pid:
                return seq
        raise ConfigurationError(f"la primitiva {pid} no está en el dataset")


def joint_trajectory(spec: GestureSpec, config: GestureConfig, steps: Optional[int] = None) -> np.ndarray:
    """
    Sinusoides de saludo desde la posición de reposo.

    El brazo que inicia arranca en t = 0; el otro espera phase_offset pasos
    (lead = both mueve ambos desde t = 0). period, phase_offset y el largo
    salen de spec.timing(config); un `steps` explícito reemplaza al largo
    de la primitiva.

    Returns:
        (T, 2) ángulos (izquierdo, derecho)
    """
    period, offset, default_steps = spec.timing(config)
    steps = default_steps if steps is None else steps
    t = np.arange(steps, dtype=float)
    starts = {"both": (0, 0), "left": (0, offset), "right": (offset, 0)}[spec.lead]
    joints = np.full((steps, 2), config.home, dtype=float)
    half = config.full_swing / 2.0
    for arm, (amp, start) in enumerate(zip((spec.amp_left, spec.amp_right), starts)):
        active = t >= start
        joints[active, arm] = config.home + amp * half * np.sin(
            2.0 * np.pi * (t[active] - start) / period)
    return joints


def frames_for(joints: np.ndarray, config: GestureConfig) -> np.ndarray:
    frames = np.empty((joints.shape[0], config.image_height, config.image_width))
    for i, angles in enumerate(joints):
        gray, _ = render_gray(angles, config.image_height, config.image_width, config.joint_range)
        frames[i] = gray_to_unit(gray)
    return frames


def synth_sequence(spec: GestureSpec, config: GestureConfig, steps: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None) -> SequencePair:
    """Par visuo-propioceptivo de una primitiva (frames, ángulos, códigos)."""
    joints = joint_trajectory(spec, config, steps)
    if rng is not None and config.joint_noise > 0:
        joints[1:] += rng.normal(0.0, config.joint_noise * (config.joint_max - config.joint_min),
                                 size=joints[1:].shape)
        joints = np.clip(joints, config.joint_min, config.joint_max)
    frames = frames_for(joints, config)
    if rng is not None and config.frame_noise > 0:
        frames[1:] = np.clip(frames[1:] + rng.normal(0.0, config.frame_noise, size=frames[1:].shape),
                             -1.0, 1.0)
    codes = encode_joints(joints, config.coding)
    return SequencePair(primitive_id=spec.id,
                        frames=frames.astype(np.float32),
                        joints=joints.astype(np.float32),
                        codes=codes.astype(np.float32),
                        spec=spec)


def build_dataset(seed: int, steps: Optional[int] = None, config: Optional[GestureConfig] = None,
                  subset: Optional[Sequence[int]] = None) -> GestureDataset:
    """
    Genera el dataset de primitivas en el orden de la taxonomía.

    Args:
        seed: semilla; el flujo "data" alimenta el ruido opcional
        steps: largo T de cada secuencia
        config: taxonomía (por defecto la del repositorio)
        subset: ids a conservar (None = todas)
    """
    config = config or load_gesture_config()
    rng = stream_rng(seed, "data")
    specs = config.primitives
    if subset is not None:
        wanted = set(subset)
        missing = wanted - {p.id for p in specs}
        if missing:
            raise ConfigurationError(f"subset con primitivas desconocidas: {sorted(missing)}")
        specs = [p for p in specs if p.id in wanted]
    sequences = [synth_sequence(spec, config, steps, rng) for spec in specs]
    logger.info("dataset sintetizado: %d secuencias de %d pasos", len(sequences),
                sequences[0].steps if sequences else 0)
    return GestureDataset(sequences, config.coding, config.image_height, config.image_width,
                          meta={"seed": str(seed)})


def make_test_stream(dataset: GestureDataset, primitive_ids: Sequence[int], jitter: float = 0.02,
                     seed: int = 0) -> SequencePair:
    """
    Concatena primitivas entrenadas en un solo flujo de observación.

    Sólo la señal propioceptiva lleva fluctuación: jitter gaussiano de
    desviación jitter * rango sobre los ángulos, recortado al rango y
    recodificado. Los cuadros no se alteran.

    Returns:
        SequencePair con primitive_id = -1 y schedule por paso
    """
    if not primitive_ids:
        raise ConfigurationError("make_test_stream requiere al menos una primitiva")
    parts = [dataset.by_id(pid) for pid in primitive_ids]
    frames = np.concatenate([p.frames for p in parts]).astype(float)
    joints = np.concatenate([p.joints for p in parts]).astype(float)
    schedule = np.concatenate([np.full(p.steps, p.primitive_id) for p in parts]).astype(np.int64)

    lo, hi = dataset.coding.joint_min, dataset.coding.joint_max
    rng = stream_rng(seed, "jitter")
    if jitter > 0:
        joints = np.clip(joints + rng.normal(0.0, jitter * (hi - lo), size=joints.shape), lo, hi)
    codes = encode_joints(joints, dataset.coding)
    return SequencePair(primitive_id=-1,
                        frames=frames.astype(np.float32),
                        joints=joints.astype(np.float32),
                        codes=codes.astype(np.float32),
                        schedule=schedule)


def home_io(config: GestureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Entrada compartida de la posición de reposo: (cuadro, código)"""
    joints = np.array([config.home, config.home])
    gray, _ = render_gray(joints, config.image_height, config.image_width, config.joint_range)
    return gray_to_unit(gray), encode_joints(joints, config.coding)


def peak_to_peak(seq: SequencePair, coding: CodingConfig) -> np.ndarray:
    """Amplitud pico a pico de la trayectoria recodificada y decodificada"""
    decoded = decode_joints(encode_joints(seq.joints.astype(float), coding), coding)
    return decoded.max(axis=0) - decoded.min(axis=0)


# ==========================
# Reporte del dataset
# ==========================
class GestureDatasetSynthesizer:
    """
    Genera, guarda y resume datasets de gestos para el entrenamiento.
    """

    def __init__(self, seed: int = 0, steps: Optional[int] = None,
                 config: Optional[GestureConfig] = None, output_dir: Path = Path("data/raw")):
        """
        Inicializa el sintetizador

        Args:
            seed: semilla única del experimento
            steps: largo de cada secuencia (None = el de cada primitiva o el de la taxonomía)
            config: taxonomía de gestos
            output_dir: directorio de salida
        """
        self.seed = seed
        self.config = config or load_gesture_config()
        self.steps = steps
        self.output_dir = Path(output_dir)
        self.dataset: Optional[GestureDataset] = None

    def synthesize(self, subset: Optional[Sequence[int]] = None) -> GestureDataset:
        print(f"🎬 Sintetizando gestos (seed={self.seed}, T={self.steps or self.config.steps})...")
        self.dataset = build_dataset(self.seed, self.steps, self.config, subset)
        print(f"✅ {len(self.dataset)} secuencias generadas")
        return self.dataset

    def get_statistics(self) -> Dict[str, any]:
        """
        Estadísticas básicas del dataset generado.

        Returns:
            Diccionario con conteos, pasos y amplitudes por primitiva
        """
        if self.dataset is None:
            return {"success": False, "error": "no hay dataset sintetizado"}
        rows = []
        for seq in self.dataset:
            p2p = peak_to_peak(seq, self.dataset.coding)
            rows.append({
                "primitive": seq.primitive_id,
                "lead": seq.spec.lead if seq.spec else "stream",
                "amp_left": seq.spec.amp_left if seq.spec else np.nan,
                "amp_right": seq.spec.amp_right if seq.spec else np.nan,
                "steps": seq.steps,
                "swing_left": float(p2p[0]),
                "swing_right": float(p2p[1]),
                "frame_mean": float(seq.frames.mean()),
            })
        table = pd.DataFrame(rows)
        return {
            "success": True,
            "sequences": len(table),
            "total_steps": int(table["steps"].sum()),
            "leads": table["lead"].value_counts().to_dict(),
            "table": table,
        }

    def generate_summary_report(self) -> str:
        """Reporte de texto con el manifiesto del dataset"""
        stats = self.get_statistics()
        if not stats["success"]:
            return f"{Fore.RED}❌ {stats['error']}"
        lines = [
            f"{Fore.CYAN}{Style.BRIGHT}📋 Resumen del dataset de gestos",
            "=" * 50,
            f"Secuencias: {stats['sequences']}   pasos totales: {stats['total_steps']}",
            f"Imagen: {self.dataset.image_height}x{self.dataset.image_width}   "
            f"código: {self.dataset.coding.groups}x{self.dataset.coding.units}",
            f"Por brazo inicial: {stats['leads']}",
            "",
            stats["table"].to_string(index=False, float_format=lambda v: f"{v:.3f}"),
        ]
        return "\n".join(lines)
