"""Binary checkpoint: magic "SRLPCKPT", JSON config block, named f64 tensors.

Per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims, little-endian
f64 data. Tensors are written name-sorted so identical state yields
identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

MAGIC = b"SRLPCKPT"
_U32 = struct.Struct("<I")


def save_checkpoint(path: str | Path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U32.pack(len(blob)))
        fh.write(blob)
        fh.write(_U32.pack(len(tensors)))
        for name in sorted(tensors):
            tensor = np.ascontiguousarray(tensors[name], dtype=np.float64)
            raw = name.encode("utf-8")
            fh.write(_U32.pack(len(raw)))
            fh.write(raw)
            fh.write(_U32.pack(tensor.ndim))
            for dim in tensor.shape:
                fh.write(_U32.pack(dim))
            fh.write(tensor.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint")
    pos = len(MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"{path}: truncated while reading {what}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    def take_u32(what: str) -> int:
        return _U32.unpack(take(4, what))[0]

    config = json.loads(take(take_u32("config length"), "config block"))
    count = take_u32("tensor count")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = take(take_u32("name length"), "tensor name").decode("utf-8")
        rank = take_u32("rank")
        shape = tuple(take_u32("dim") for _ in range(rank))
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(take(8 * size, f"tensor {name}"), dtype="<f8")
        tensors[name] = values.reshape(shape).copy()
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return config, tensors
