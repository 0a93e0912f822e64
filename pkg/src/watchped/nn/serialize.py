"""Weights container: named float64 arrays in one self-describing binary file.

Layout (all integers little-endian):

    magic   4 bytes  b"WPWT"
    version uint32
    count   uint32
    entry*  name_len uint16, name utf-8, ndim uint8, dims uint32 * ndim,
            values float64 * prod(dims), row-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Tensor

__all__ = ["save_weights", "load_weights", "FORMAT_VERSION"]

MAGIC = b"WPWT"
FORMAT_VERSION = 1


def save_weights(path, tensors: Mapping[str, "Tensor | np.ndarray"]) -> None:
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value.data if isinstance(value, Tensor) else value,
                                   dtype="<f8")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"weight name too long: {name[:40]!r}...")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a weights file (bad magic {blob[:4]!r})")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported weights format version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        dims = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        n = int(np.prod(dims)) if ndim else 1
        values = np.frombuffer(blob, dtype="<f8", count=n, offset=offset)
        offset += 8 * n
        out[name] = values.reshape(dims).astype(np.float64)
    return out
