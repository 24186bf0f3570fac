"""Input stage (image -> C-channel drive) and the 1x1 readout head."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from equilib.tensor import (
    Variable,
    as_kernel,
    batch_norm,
    channel_vector,
    conv2d,
    scaled_normal,
)

from .base import check_channels


@dataclass(frozen=True, slots=True)
class InputStageParams:
    kernel: Variable
    bias: Variable

    @property
    def channels(self) -> int:
        return self.kernel.shape[-1]

    def named(self) -> dict[str, Variable]:
        return {"kernel": self.kernel, "bias": self.bias}

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> InputStageParams:
        return cls(
            kernel=Variable(arrays["kernel"], requires_grad=True, name="kernel"),
            bias=Variable(arrays["bias"], requires_grad=True, name="bias"),
        )

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, channels: int, kernel_size: int
    ) -> InputStageParams:
        shape = (kernel_size, kernel_size, 1, channels)
        return cls(
            kernel=as_kernel(scaled_normal(rng, shape), name="kernel"),
            bias=channel_vector(0.0, channels, name="bias"),
        )


def input_stage(image: Variable, params: InputStageParams) -> Variable:
    check_channels("image", image, 1)
    return conv2d(image, params.kernel) + params.bias


@dataclass(frozen=True, slots=True)
class ReadoutParams:
    bn_scale: Variable
    bn_bias: Variable
    kernel: Variable

    @property
    def channels(self) -> int:
        return self.kernel.shape[2]

    def named(self) -> dict[str, Variable]:
        return {"bn_scale": self.bn_scale, "bn_bias": self.bn_bias, "kernel": self.kernel}

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> ReadoutParams:
        return cls(
            **{
                name: Variable(arrays[name], requires_grad=True, name=name)
                for name in ("bn_scale", "bn_bias", "kernel")
            }
        )

    @classmethod
    def initialize(cls, rng: np.random.Generator, channels: int) -> ReadoutParams:
        return cls(
            bn_scale=channel_vector(1.0, channels, name="bn_scale"),
            bn_bias=channel_vector(0.0, channels, name="bn_bias"),
            kernel=as_kernel(scaled_normal(rng, (1, 1, channels, 1)), name="kernel"),
        )


def readout(h: Variable, params: ReadoutParams, bn_eps: float = 1e-5) -> Variable:
    """Per-pixel logits with shape (batch, height, width, 1)."""

    check_channels("hidden state h", h, params.channels)
    normalized = batch_norm(h, params.bn_scale, params.bn_bias, bn_eps)
    return conv2d(normalized, params.kernel)
