"""Feedforward control: a stack of hGRU layers that do not share weights."""

from __future__ import annotations

import re
from collections.abc import Mapping, Sequence

import numpy as np

from equilib.errors import ShapeMismatchError
from equilib.tensor import Variable

from .base import CellState
from .hgru import HGruParams, hgru_step

_LAYER = re.compile(r"^layer(\d+)\.(.+)$")


class FeedforwardHGruCell:
    """``depth`` hGRU layers applied once each, in order.

    One ``step`` runs the whole stack, so training it with ``bptt`` at
    ``steps = 1`` is ordinary backprop through a feedforward network with
    the same per-layer computation as the recurrent hGRU.
    """

    kind = "ffhgru"

    def __init__(self, layers: Sequence[HGruParams], bn_eps: float = 1e-5) -> None:
        if not layers:
            raise ShapeMismatchError("FeedforwardHGruCell needs at least one layer")
        channels = {params.channels for params in layers}
        if len(channels) != 1:
            raise ShapeMismatchError(f"Layers disagree on channel count: {sorted(channels)}")
        self.layers = list(layers)
        self.bn_eps = bn_eps

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        channels: int,
        kernel_size: int,
        depth: int,
        bn_eps: float = 1e-5,
    ) -> FeedforwardHGruCell:
        return cls(
            [HGruParams.initialize(rng, channels, kernel_size) for _ in range(depth)],
            bn_eps=bn_eps,
        )

    @classmethod
    def from_arrays(
        cls, arrays: Mapping[str, np.ndarray], bn_eps: float = 1e-5
    ) -> FeedforwardHGruCell:
        grouped: dict[int, dict[str, np.ndarray]] = {}
        for key, value in arrays.items():
            match = _LAYER.match(key)
            if match is None:
                raise ShapeMismatchError(f"Unexpected feedforward parameter: {key}")
            grouped.setdefault(int(match.group(1)), {})[match.group(2)] = value
        if sorted(grouped) != list(range(len(grouped))):
            raise ShapeMismatchError(f"Feedforward layers are not contiguous: {sorted(grouped)}")
        return cls(
            [HGruParams.from_arrays(grouped[index]) for index in range(len(grouped))],
            bn_eps=bn_eps,
        )

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def channels(self) -> int:
        return self.layers[0].channels

    @property
    def state_channels(self) -> int:
        return self.channels

    def step(self, drive: Variable, state: Variable) -> Variable:
        h = state
        for params in self.layers:
            h = hgru_step(drive, CellState(h=h), params, bn_eps=self.bn_eps).h
        return h

    def hidden(self, state: Variable) -> Variable:
        return state

    def parameters(self) -> dict[str, Variable]:
        return {
            f"layer{index}.{name}": variable
            for index, params in enumerate(self.layers)
            for name, variable in params.named().items()
        }
