"""
Contenedor binario común a datasets y checkpoints.

    magic | versión u16 | cabecera extra | largo del manifiesto u32 |
    manifiesto JSON (UTF-8) | blobs float32 little-endian | CRC32 u32

Todos los enteros son little-endian. El CRC32 (zlib) cubre todos los bytes
anteriores.
"""

import logging
import struct
import zlib
from pathlib import Path
from typing import Iterable, Tuple

import numpy as np
from pydantic import BaseModel

from network.errors import FileFormatError

logger = logging.getLogger(__name__)

FLOAT = np.dtype("<f4")


def write_container(path: Path, magic: bytes, version: int, manifest: BaseModel,
                    blobs: Iterable[np.ndarray], prefix: bytes = b"") -> int:
    """
    Escribe el contenedor y devuelve el tamaño final en bytes.
    """
    text = manifest.model_dump_json().encode("utf-8")
    parts = [magic, struct.pack("<H", version), prefix, struct.pack("<I", len(text)), text]
    parts.extend(np.ascontiguousarray(blob, dtype=FLOAT).tobytes() for blob in blobs)
    body = b"".join(parts)
    raw = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(raw)
    logger.debug("contenedor %s escrito: %d bytes", path, len(raw))
    return len(raw)


def read_container(path: Path, magic: bytes, version: int, prefix_size: int = 0) -> Tuple[bytes, str, bytes]:
    """
    Valida magic, versión y CRC.

    Returns:
        (cabecera extra, manifiesto JSON, bytes de los blobs)
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise FileFormatError(f"no se pudo leer {path}: {e}") from e

    head = len(magic) + 2 + prefix_size + 4
    if len(raw) < head + 4:
        raise FileFormatError(f"{path.name}: archivo truncado ({len(raw)} bytes)")
    if raw[:len(magic)] != magic:
        raise FileFormatError(f"{path.name}: magic inválido {raw[:len(magic)]!r}, se esperaba {magic!r}")
    (found,) = struct.unpack_from("<H", raw, len(magic))
    if found != version:
        raise FileFormatError(f"{path.name}: versión de formato {found} no soportada (se esperaba {version})")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc:
        raise FileFormatError(f"{path.name}: CRC32 no coincide (archivo corrupto o truncado)")

    prefix = raw[len(magic) + 2:len(magic) + 2 + prefix_size]
    (length,) = struct.unpack_from("<I", raw, head - 4)
    if head + length > len(raw) - 4:
        raise FileFormatError(f"{path.name}: manifiesto más largo que el archivo")
    text = raw[head:head + length].decode("utf-8")
    return prefix, text, raw[head + length:-4]


class BlobReader:
    """Lee blobs float32 consecutivos verificando que el tamaño cuadre"""

    def __init__(self, body: bytes, source: str):
        self.body = body
        self.source = source
        self.offset = 0

    def take(self, shape: Tuple[int, ...], nbytes: int) -> np.ndarray:
        expected = int(np.prod(shape)) * FLOAT.itemsize
        if nbytes != expected:
            raise FileFormatError(f"{self.source}: el manifiesto declara {nbytes} bytes para {shape}")
        if self.offset + nbytes > len(self.body):
            raise FileFormatError(f"{self.source}: blob truncado en el byte {self.offset}")
        arr = np.frombuffer(self.body, dtype=FLOAT, count=int(np.prod(shape)), offset=self.offset)
        self.offset += nbytes
        return arr.reshape(shape).astype(np.float32)

    def finish(self):
        if self.offset != len(self.body):
            raise FileFormatError(f"{self.source}: {len(self.body) - self.offset} bytes sobrantes")
