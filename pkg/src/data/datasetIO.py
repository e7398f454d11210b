"""
Persistencia binaria de datasets de gestos (formato PVMD-DS).

    "PVMD-DS" | versión u16 | n secuencias u32 | largo del manifiesto u32 |
    manifiesto JSON | por secuencia: frames, joints, codes (float32 LE) | CRC32
"""

import logging
import struct
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from data.binaryFormat import BlobReader, FLOAT, read_container, write_container
from data.coding import CodingConfig
from data.gestureSynth import GestureDataset, GestureSpec, SequencePair
from network.errors import FileFormatError

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"PVMD-DS"
DATASET_VERSION = 1


class SequenceEntry(BaseModel):
    id: int
    steps: int
    spec: Optional[GestureSpec] = None
    schedule: Optional[List[int]] = None
    frames_bytes: int
    joints_bytes: int
    codes_bytes: int


class DatasetManifest(BaseModel):
    image_height: int
    image_width: int
    coding: CodingConfig
    sequences: List[SequenceEntry]
    meta: Dict[str, str] = {}

    @property
    def payload_bytes(self) -> int:
        return sum(e.frames_bytes + e.joints_bytes + e.codes_bytes for e in self.sequences)


def build_manifest(dataset: GestureDataset) -> DatasetManifest:
    entries = []
    for seq in dataset.sequences:
        entries.append(SequenceEntry(
            id=seq.primitive_id,
            steps=seq.steps,
            spec=seq.spec,
            schedule=None if seq.schedule is None else [int(v) for v in seq.schedule],
            frames_bytes=seq.frames.size * FLOAT.itemsize,
            joints_bytes=seq.joints.size * FLOAT.itemsize,
            codes_bytes=seq.codes.size * FLOAT.itemsize,
        ))
    return DatasetManifest(image_height=dataset.image_height, image_width=dataset.image_width,
                           coding=dataset.coding, sequences=entries, meta=dict(dataset.meta))


def expected_file_size(manifest: DatasetManifest) -> int:
    """Tamaño exacto del archivo que describe el manifiesto"""
    text = manifest.model_dump_json().encode("utf-8")
    return len(DATASET_MAGIC) + 2 + 4 + 4 + len(text) + manifest.payload_bytes + 4


def save_dataset(path: Path, dataset: GestureDataset) -> int:
    """
    Guarda el dataset y devuelve el número de bytes escritos.
    """
    manifest = build_manifest(dataset)
    blobs = []
    for seq in dataset.sequences:
        blobs.extend([seq.frames, seq.joints, seq.codes])
    size = write_container(path, DATASET_MAGIC, DATASET_VERSION, manifest, blobs,
                           prefix=struct.pack("<I", len(dataset.sequences)))
    logger.info("dataset guardado en %s (%d secuencias, %d bytes)", path, len(dataset.sequences), size)
    return size


def load_dataset(path: Path) -> GestureDataset:
    """
    Lee un dataset validando magic, versión, CRC y tamaños declarados.
    """
    path = Path(path)
    prefix, text, body = read_container(path, DATASET_MAGIC, DATASET_VERSION, prefix_size=4)
    (count,) = struct.unpack("<I", prefix)
    try:
        manifest = DatasetManifest.model_validate_json(text)
    except ValidationError as e:
        raise FileFormatError(f"{path.name}: manifiesto inválido: {e}") from e
    if count != len(manifest.sequences):
        raise FileFormatError(f"{path.name}: cabecera declara {count} secuencias, manifiesto {len(manifest.sequences)}")

    reader = BlobReader(body, path.name)
    h, w = manifest.image_height, manifest.image_width
    sequences = []
    for entry in manifest.sequences:
        frames = reader.take((entry.steps, h, w), entry.frames_bytes)
        joints = reader.take((entry.steps, manifest.coding.groups), entry.joints_bytes)
        codes = reader.take((entry.steps, manifest.coding.size), entry.codes_bytes)
        schedule = None if entry.schedule is None else np.asarray(entry.schedule, dtype=np.int64)
        sequences.append(SequencePair(entry.id, frames, joints, codes, entry.spec, schedule))
    reader.finish()
    return GestureDataset(sequences, manifest.coding, h, w, meta=dict(manifest.meta))
