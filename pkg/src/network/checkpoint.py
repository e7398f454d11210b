"""
Checkpoints binarios (formato PVMD).

    "PVMD" | versión u16 | largo del manifiesto u32 | manifiesto JSON |
    tensores float32 LE en el orden del manifiesto | CRC32

El manifiesto guarda la topología completa, los tau por capa, los ids de las
secuencias de entrenamiento y la configuración del código poblacional.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ValidationError

from config.networkConfig import HIDDEN_LAYERS, NetworkConfig
from data.binaryFormat import BlobReader, FLOAT, read_container, write_container
from data.coding import CodingConfig
from network.errors import ConfigurationError, FileFormatError
from network.parameters import Parameters, tensor_specs

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PVMD"
CHECKPOINT_VERSION = 1


class TensorEntry(BaseModel):
    name: str
    shape: List[int]
    nbytes: int


class CheckpointManifest(BaseModel):
    network: NetworkConfig
    tau: Dict[str, float]
    sequence_ids: List[int]
    epoch: int = 0
    coding: Optional[CodingConfig] = None
    tensors: List[TensorEntry]


@dataclass
class Checkpoint:
    params: Parameters
    epoch: int = 0
    coding: Optional[CodingConfig] = None

    @property
    def config(self) -> NetworkConfig:
        return self.params.config

    def sequence_index(self, primitive_id: int) -> int:
        try:
            return self.params.sequence_ids.index(primitive_id)
        except ValueError:
            raise ConfigurationError(
                f"el checkpoint no tiene estado inicial para la primitiva {primitive_id}; "
                f"disponibles: {self.params.sequence_ids}") from None


def _tensor_order(params: Parameters) -> List[str]:
    names = [spec.name for spec in tensor_specs(params.config)]
    return names + [f"init.{name}" for name in HIDDEN_LAYERS]


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> int:
    params = checkpoint.params
    order = _tensor_order(params)
    manifest = CheckpointManifest(
        network=params.config,
        tau={name: params.config.tau(name) for name in HIDDEN_LAYERS},
        sequence_ids=list(params.sequence_ids),
        epoch=checkpoint.epoch,
        coding=checkpoint.coding,
        tensors=[TensorEntry(name=n, shape=list(params.tensors[n].shape),
                             nbytes=params.tensors[n].size * FLOAT.itemsize) for n in order],
    )
    size = write_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, manifest,
                           [params.tensors[n] for n in order])
    logger.info("checkpoint guardado en %s (época %d)", path, checkpoint.epoch)
    return size


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Lee un checkpoint; los tensores vuelven a doble precisión.
    """
    path = Path(path)
    _, text, body = read_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    try:
        manifest = CheckpointManifest.model_validate_json(text)
    except ValidationError as e:
        raise FileFormatError(f"{path.name}: manifiesto inválido: {e}") from e

    reader = BlobReader(body, path.name)
    tensors = {}
    for entry in manifest.tensors:
        tensors[entry.name] = reader.take(tuple(entry.shape), entry.nbytes).astype(float)
    reader.finish()

    params = Parameters(manifest.network, tensors, list(manifest.sequence_ids))
    expected = _tensor_order(params)
    if [e.name for e in manifest.tensors] != expected:
        raise FileFormatError(f"{path.name}: el orden de tensores no coincide con la topología")
    for spec in tensor_specs(manifest.network):
        if tuple(tensors[spec.name].shape) != spec.shape:
            raise FileFormatError(f"{path.name}: {spec.name} con forma {tensors[spec.name].shape}, "
                                  f"se esperaba {spec.shape}")
    return Checkpoint(params=params, epoch=manifest.epoch, coding=manifest.coding)
