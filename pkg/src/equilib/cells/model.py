"""Full segmentation model: input stage, recurrent cell, readout."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np

from equilib.errors import EquilibConfigError
from equilib.tensor import Variable

from .base import RecurrentCell
from .conv_lstm import ConvLstmCell, ConvLstmParams
from .feedforward import FeedforwardHGruCell
from .heads import InputStageParams, ReadoutParams, input_stage, readout
from .hgru import HGruCell, HGruParams

CELL_KINDS = ("hgru", "convlstm", "ffhgru")


@dataclass(frozen=True, slots=True)
class ModelConfig:
    cell: str = "hgru"
    channels: int = 8
    kernel_size: int = 5
    input_kernel_size: int = 5
    bn_eps: float = 1e-5
    depth: int = 6

    def __post_init__(self) -> None:
        if self.cell not in CELL_KINDS:
            raise EquilibConfigError(
                f"Unknown cell kind: {self.cell}",
                hint=f"Choose one of {', '.join(CELL_KINDS)}.",
            )
        if self.channels < 1:
            raise EquilibConfigError(f"model.channels must be >= 1, got {self.channels}")
        for key in ("kernel_size", "input_kernel_size"):
            size = getattr(self, key)
            if size < 1 or size % 2 == 0:
                raise EquilibConfigError(f"model.{key} must be a positive odd integer, got {size}")
        if self.bn_eps < 0:
            raise EquilibConfigError(f"model.bn_eps must be >= 0, got {self.bn_eps}")
        if self.depth < 1:
            raise EquilibConfigError(f"model.depth must be >= 1, got {self.depth}")

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> ModelConfig:
        return cls(
            cell=str(settings.get("cell", "hgru")),
            channels=int(settings.get("channels", 8)),
            kernel_size=int(settings.get("kernel_size", 5)),
            input_kernel_size=int(settings.get("input_kernel_size", 5)),
            bn_eps=float(settings.get("bn_eps", 1e-5)),
            depth=int(settings.get("depth", 6)),
        )

    def as_settings(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.__slots__}


class RecurrentModel:
    def __init__(
        self,
        config: ModelConfig,
        input_params: InputStageParams,
        cell: RecurrentCell,
        readout_params: ReadoutParams,
    ) -> None:
        self.config = config
        self.input_params = input_params
        self.cell = cell
        self.readout_params = readout_params

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> RecurrentModel:
        input_params = InputStageParams.initialize(rng, config.channels, config.input_kernel_size)
        if config.cell == "hgru":
            cell: RecurrentCell = HGruCell(
                HGruParams.initialize(rng, config.channels, config.kernel_size),
                bn_eps=config.bn_eps,
            )
        elif config.cell == "ffhgru":
            cell = FeedforwardHGruCell.initialize(
                rng, config.channels, config.kernel_size, config.depth, bn_eps=config.bn_eps
            )
        else:
            cell = ConvLstmCell(ConvLstmParams.initialize(rng, config.channels, config.kernel_size))
        return cls(config, input_params, cell, ReadoutParams.initialize(rng, config.channels))

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: Mapping[str, np.ndarray]) -> RecurrentModel:
        def section(prefix: str) -> dict[str, np.ndarray]:
            return {
                key[len(prefix) + 1 :]: value
                for key, value in arrays.items()
                if key.startswith(prefix + ".")
            }

        if config.cell == "hgru":
            cell: RecurrentCell = HGruCell(
                HGruParams.from_arrays(section("cell")), bn_eps=config.bn_eps
            )
        elif config.cell == "ffhgru":
            cell = FeedforwardHGruCell.from_arrays(section("cell"), bn_eps=config.bn_eps)
        else:
            cell = ConvLstmCell(ConvLstmParams.from_arrays(section("cell")))
        return cls(
            config,
            InputStageParams.from_arrays(section("input")),
            cell,
            ReadoutParams.from_arrays(section("readout")),
        )

    def drive(self, image: Variable) -> Variable:
        return input_stage(image, self.input_params)

    def readout(self, state: Variable) -> Variable:
        return readout(self.cell.hidden(state), self.readout_params, self.config.bn_eps)

    def parameters(self) -> dict[str, Variable]:
        named: dict[str, Variable] = {}
        for prefix, params in (
            ("input", self.input_params.named()),
            ("cell", self.cell.parameters()),
            ("readout", self.readout_params.named()),
        ):
            for name, variable in params.items():
                named[f"{prefix}.{name}"] = variable
        return named

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: variable.value.copy() for name, variable in self.parameters().items()}
