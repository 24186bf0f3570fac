"""Convolutional LSTM over the concatenated ``[x, h]`` input."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from equilib.errors import ShapeMismatchError
from equilib.tensor import (
    Variable,
    as_kernel,
    channel_vector,
    concat_channels,
    conv2d,
    scaled_normal,
    sigmoid,
    tanh,
)

from .base import CellState, check_channels

GATES = ("input", "forget", "output", "cell")
FORGET_BIAS_INIT = 1.0


@dataclass(frozen=True, slots=True)
class ConvLstmParams:
    k_input: Variable
    k_forget: Variable
    k_output: Variable
    k_cell: Variable
    b_input: Variable
    b_forget: Variable
    b_output: Variable
    b_cell: Variable

    @property
    def channels(self) -> int:
        return self.k_input.shape[-1]

    @property
    def kernel_size(self) -> int:
        return self.k_input.shape[0]

    def named(self) -> dict[str, Variable]:
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> ConvLstmParams:
        return cls(
            **{
                name: Variable(np.asarray(arrays[name]), requires_grad=True, name=name)
                for name in cls.__slots__
            }
        )

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, channels: int, kernel_size: int
    ) -> ConvLstmParams:
        shape = (kernel_size, kernel_size, 2 * channels, channels)
        kernels = {
            f"k_{gate}": as_kernel(scaled_normal(rng, shape), name=f"k_{gate}")
            for gate in GATES
        }
        biases = {
            f"b_{gate}": channel_vector(
                FORGET_BIAS_INIT if gate == "forget" else 0.0, channels, name=f"b_{gate}"
            )
            for gate in GATES
        }
        return cls(**kernels, **biases)


def conv_lstm_step(x: Variable, state: CellState, params: ConvLstmParams) -> CellState:
    channels = params.channels
    check_channels("drive x", x, channels)
    check_channels("hidden state h", state.h, channels)
    if state.c is None:
        raise ShapeMismatchError("conv_lstm_step needs a cell memory c, got none")
    check_channels("cell memory c", state.c, channels)

    xh = concat_channels([x, state.h])
    i = sigmoid(conv2d(xh, params.k_input) + params.b_input)
    f = sigmoid(conv2d(xh, params.k_forget) + params.b_forget)
    o = sigmoid(conv2d(xh, params.k_output) + params.b_output)
    g = tanh(conv2d(xh, params.k_cell) + params.b_cell)
    c_next = f * state.c + i * g
    return CellState(h=o * tanh(c_next), c=c_next)


class ConvLstmCell:
    kind = "convlstm"

    def __init__(self, params: ConvLstmParams) -> None:
        self.params = params

    @property
    def channels(self) -> int:
        return self.params.channels

    @property
    def state_channels(self) -> int:
        return 2 * self.params.channels

    def step(self, drive: Variable, state: Variable) -> Variable:
        unpacked = CellState.unpack(state, self.channels, has_memory=True)
        return conv_lstm_step(drive, unpacked, self.params).pack()

    def hidden(self, state: Variable) -> Variable:
        return CellState.unpack(state, self.channels, has_memory=True).h

    def parameters(self) -> dict[str, Variable]:
        return self.params.named()
