"""Shared types for recurrent transition functions ``h' = F(x, h, w)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from equilib.errors import ShapeMismatchError
from equilib.tensor import Variable, concat_channels, constant, split_channels


@dataclass(frozen=True, slots=True)
class CellState:
    """Hidden state ``h`` plus the convLSTM memory ``c`` when present."""

    h: Variable
    c: Variable | None = None

    def pack(self) -> Variable:
        if self.c is None:
            return self.h
        return concat_channels([self.h, self.c])

    @classmethod
    def unpack(cls, packed: Variable, channels: int, has_memory: bool) -> CellState:
        if not has_memory:
            return cls(h=packed)
        h, c = split_channels(packed, [channels, channels])
        return cls(h=h, c=c)


@runtime_checkable
class RecurrentCell(Protocol):
    """A transition function acting on a packed state Variable.

    The packed state is what the equilibrium machinery iterates; ``hidden``
    extracts the part the readout sees.
    """

    kind: str

    @property
    def channels(self) -> int: ...

    @property
    def state_channels(self) -> int: ...

    def step(self, drive: Variable, state: Variable) -> Variable: ...

    def hidden(self, state: Variable) -> Variable: ...

    def parameters(self) -> dict[str, Variable]: ...


def zero_state(cell: RecurrentCell, drive: Variable) -> Variable:
    return constant(np.zeros(drive.shape[:-1] + (cell.state_channels,)))


def check_channels(name: str, tensor: Variable, channels: int) -> None:
    if tensor.ndim != 4 or tensor.shape[-1] != channels:
        raise ShapeMismatchError(
            f"{name} has shape {tensor.shape}, expected {channels} channels"
        )
