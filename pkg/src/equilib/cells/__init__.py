"""Recurrent convolutional cells and the heads around them."""

from .base import CellState, RecurrentCell, zero_state
from .conv_lstm import ConvLstmCell, ConvLstmParams, conv_lstm_step
from .feedforward import FeedforwardHGruCell
from .heads import InputStageParams, ReadoutParams, input_stage, readout
from .hgru import HGruCell, HGruParams, constant_gate, facilitation, hgru_step, suppression
from .linear import LinearCell
from .model import CELL_KINDS, ModelConfig, RecurrentModel

__all__ = [
    "CELL_KINDS",
    "CellState",
    "ConvLstmCell",
    "ConvLstmParams",
    "FeedforwardHGruCell",
    "HGruCell",
    "HGruParams",
    "InputStageParams",
    "LinearCell",
    "ModelConfig",
    "ReadoutParams",
    "RecurrentCell",
    "RecurrentModel",
    "constant_gate",
    "conv_lstm_step",
    "facilitation",
    "hgru_step",
    "input_stage",
    "readout",
    "suppression",
    "zero_state",
]
