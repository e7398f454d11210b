"""
Separación de una semilla única en flujos aleatorios con nombre.

Cada flujo ("params", "data", "jitter") es independiente de los demás, de modo
que cambiar el ruido de la secuencia de prueba no altera la inicialización.
"""

import zlib

import numpy as np

STREAMS = ("params", "data", "jitter", "gradcheck")


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    key = zlib.crc32(stream.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(key,)))
