"""Construction and validation of NHWC tensors and HWIO kernels."""

from __future__ import annotations

from typing import Any

import numpy as np

from equilib.errors import NonFiniteError, ShapeMismatchError

from .tape import Variable


def as_tensor(data: Any, *, requires_grad: bool = False, name: str | None = None) -> Variable:
    """Wrap a (batch, height, width, channels) array as a Variable."""

    value = np.asarray(data, dtype=np.float64)
    if value.ndim != 4 or min(value.shape) < 1:
        raise ShapeMismatchError(
            f"Tensor needs shape (batch, height, width, channels) with every dim >= 1, "
            f"got {value.shape}"
        )
    if not np.all(np.isfinite(value)):
        label = f" {name!r}" if name else ""
        raise NonFiniteError(f"Tensor{label} holds NaN or Inf values")
    return Variable(value, requires_grad=requires_grad, name=name)


def as_kernel(data: Any, *, requires_grad: bool = True, name: str | None = None) -> Variable:
    """Wrap a (kh, kw, in_channels, out_channels) array with odd spatial extents."""

    value = np.asarray(data, dtype=np.float64)
    if value.ndim != 4:
        raise ShapeMismatchError(
            f"Kernel needs shape (kh, kw, in_channels, out_channels), got {value.shape}"
        )
    if value.shape[0] % 2 == 0 or value.shape[1] % 2 == 0:
        raise ShapeMismatchError(f"Kernel spatial extents must be odd, got {value.shape}")
    return Variable(value, requires_grad=requires_grad, name=name)


def channel_vector(
    values: Any, channels: int, *, requires_grad: bool = True, name: str | None = None
) -> Variable:
    """Per-channel parameter stored as shape (1, 1, 1, channels)."""

    array = np.broadcast_to(np.asarray(values, dtype=np.float64), (channels,))
    return Variable(array.reshape(1, 1, 1, channels), requires_grad=requires_grad, name=name)


def dirac_kernel(size: int, in_channels: int, out_channels: int | None = None) -> np.ndarray:
    """Centre-one kernel; conv2d with it copies matching channels."""

    out_channels = in_channels if out_channels is None else out_channels
    kernel = np.zeros((size, size, in_channels, out_channels))
    centre = size // 2
    for c in range(min(in_channels, out_channels)):
        kernel[centre, centre, c, c] = 1.0
    return kernel


def scaled_normal(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int | None = None
) -> np.ndarray:
    """Normal draw scaled by 1/sqrt(fan_in) (fan_in defaults to kh*kw*in_channels)."""

    if fan_in is None:
        fan_in = int(np.prod(shape[:-1])) if len(shape) > 1 else 1
    return rng.standard_normal(shape) / np.sqrt(max(fan_in, 1))
