"""Flat binary tensor format: four little-endian u32 dims, then f64 LE data."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from equilib.errors import EquilibIOError, ShapeMismatchError

_HEADER = struct.Struct("<4I")
HEADER_BYTES = _HEADER.size


def encode_tensor(array: np.ndarray) -> bytes:
    value = np.asarray(array, dtype=np.float64)
    if value.ndim != 4:
        raise ShapeMismatchError(f"Only 4-D tensors serialize, got shape {value.shape}")
    payload = np.ascontiguousarray(value, dtype="<f8").tobytes(order="C")
    return _HEADER.pack(*value.shape) + payload


def decode_tensor(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < HEADER_BYTES:
        raise EquilibIOError(f"Truncated tensor header in {source}")
    shape = _HEADER.unpack_from(blob)
    expected = int(np.prod(shape)) * 8
    payload = blob[HEADER_BYTES:]
    if len(payload) != expected:
        raise EquilibIOError(
            f"Tensor payload in {source} has {len(payload)} bytes, "
            f"header shape {shape} needs {expected}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)


def write_tensor(path: Path, array: np.ndarray) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_tensor(array))
    except OSError as exc:
        raise EquilibIOError(f"Failed to write tensor: {path}") from exc
    return path


def read_tensor(path: Path) -> np.ndarray:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise EquilibIOError(
            f"Failed to read tensor: {path}",
            hint="Check that the checkpoint directory is complete.",
        ) from exc
    return decode_tensor(blob, source=str(path))
