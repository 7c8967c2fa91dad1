"""
Named-tensor container used for weight, bank, prompt and dataset snapshots.

Layout (little-endian throughout):

    magic     8 bytes  b"MINTTNSR"
    count     u32      number of tensors
    per tensor:
        name_len  u16, name  utf-8 bytes
        ndim      u8,  extents  ndim x u64
        data      prod(extents) x f64, row-major
"""

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from .result import Result

SNAPSHOT_MAGIC = b"MINTTNSR"

_LE_F64 = np.dtype("<f8")


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [SNAPSHOT_MAGIC, struct.pack("<I", len(tensors))]

    for name, array in tensors.items():
        encoded_name = name.encode("utf-8")
        array = np.asarray(array, dtype=_LE_F64, order="C")
        chunks.append(struct.pack("<H", len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.tobytes(order="C"))

    return b"".join(chunks)


def decode_tensors(payload: bytes) -> dict[str, np.ndarray]:
    if payload[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise ConfigError("not a named-tensor snapshot (bad magic)")

    offset = len(SNAPSHOT_MAGIC)

    def read(fmt: str):
        nonlocal offset
        values = struct.unpack_from(fmt, payload, offset)
        offset += struct.calcsize(fmt)
        return values

    (count,) = read("<I")
    tensors: dict[str, np.ndarray] = {}

    for _ in range(count):
        (name_len,) = read("<H")
        name = payload[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = read("<B")
        shape = read(f"<{ndim}Q")
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(payload, dtype=_LE_F64, count=size, offset=offset)
        offset += size * _LE_F64.itemsize
        tensors[name] = data.astype(np.float64).reshape(shape)

    if offset != len(payload):
        raise ConfigError(f"snapshot has {len(payload) - offset} trailing bytes")

    return tensors


@Result.do(catch=(OSError,))
def save_tensors(path: str | Path, tensors: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensors(tensors))
    return path


@Result.do(catch=(OSError, ConfigError, ValueError, struct.error))
def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    return decode_tensors(Path(path).read_bytes())
