"""Horizontal gated recurrent unit: a suppression stage then a facilitation stage."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from equilib.tensor import (
    Variable,
    as_kernel,
    batch_norm,
    channel_vector,
    constant,
    conv2d,
    scaled_normal,
    sigmoid,
    softplus,
)

from .base import CellState, check_channels

# Forces the facilitation gate; used by tests only.
GateOverride = Callable[[Variable], Variable]

ALPHA_INIT = 0.1
MU_INIT = 0.0
NU_F_INIT = 1.0
OMEGA_INIT = 0.1
RECURRENT_BN_SCALE_INIT = 0.1


@dataclass(frozen=True, slots=True)
class HGruParams:
    u_s: Variable
    u_f: Variable
    w_s: Variable
    w_f: Variable
    alpha: Variable
    mu: Variable
    nu_f: Variable
    omega: Variable
    bn_s_scale: Variable
    bn_s_bias: Variable
    bn_f_scale: Variable
    bn_f_bias: Variable

    @property
    def channels(self) -> int:
        return self.u_s.shape[-1]

    @property
    def kernel_size(self) -> int:
        return self.w_s.shape[0]

    def named(self) -> dict[str, Variable]:
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> HGruParams:
        return cls(
            **{
                name: Variable(np.asarray(arrays[name]), requires_grad=True, name=name)
                for name in cls.__slots__
            }
        )

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, channels: int, kernel_size: int
    ) -> HGruParams:
        c, e = channels, kernel_size
        return cls(
            u_s=as_kernel(scaled_normal(rng, (1, 1, c, c)), name="u_s"),
            u_f=as_kernel(scaled_normal(rng, (1, 1, c, c)), name="u_f"),
            w_s=as_kernel(scaled_normal(rng, (e, e, c, c)), name="w_s"),
            w_f=as_kernel(scaled_normal(rng, (e, e, c, c)), name="w_f"),
            alpha=channel_vector(ALPHA_INIT, c, name="alpha"),
            mu=channel_vector(MU_INIT, c, name="mu"),
            nu_f=channel_vector(NU_F_INIT, c, name="nu_f"),
            omega=channel_vector(OMEGA_INIT, c, name="omega"),
            bn_s_scale=channel_vector(RECURRENT_BN_SCALE_INIT, c, name="bn_s_scale"),
            bn_s_bias=channel_vector(0.0, c, name="bn_s_bias"),
            bn_f_scale=channel_vector(RECURRENT_BN_SCALE_INIT, c, name="bn_f_scale"),
            bn_f_bias=channel_vector(0.0, c, name="bn_f_bias"),
        )


def suppression(z: Variable, h: Variable, params: HGruParams, bn_eps: float = 1e-5) -> Variable:
    """Stage 1 output ``S``: the drive after gated horizontal inhibition, >= 0."""

    g_s = sigmoid(conv2d(h, params.u_s))
    c_s = batch_norm(conv2d(h * g_s, params.w_s), params.bn_s_scale, params.bn_s_bias, bn_eps)
    return softplus(z - softplus((params.alpha * h + params.mu) * c_s))


def facilitation(s: Variable, params: HGruParams, bn_eps: float = 1e-5) -> Variable:
    """Stage 2 candidate state from ``S``, >= 0."""

    c_f = batch_norm(conv2d(s, params.w_f), params.bn_f_scale, params.bn_f_bias, bn_eps)
    return softplus(params.nu_f * (c_f + s) + params.omega * (c_f * s))


def hgru_step(
    z: Variable,
    state: CellState,
    params: HGruParams,
    *,
    bn_eps: float = 1e-5,
    gate_override: GateOverride | None = None,
) -> CellState:
    channels = params.channels
    check_channels("drive z", z, channels)
    check_channels("hidden state h", state.h, channels)
    h = state.h

    s = suppression(z, h, params, bn_eps)
    g_f = sigmoid(conv2d(s, params.u_f))
    if gate_override is not None:
        g_f = gate_override(g_f)
    h_tilde = facilitation(s, params, bn_eps)
    return CellState(h=(1.0 - g_f) * h + g_f * h_tilde)


def constant_gate(value: float) -> GateOverride:
    """Gate override returning ``value`` everywhere."""

    def _override(gate: Variable) -> Variable:
        return constant(np.full(gate.shape, value))

    return _override


class HGruCell:
    kind = "hgru"

    def __init__(
        self,
        params: HGruParams,
        bn_eps: float = 1e-5,
        gate_override: GateOverride | None = None,
    ) -> None:
        self.params = params
        self.bn_eps = bn_eps
        self._gate_override = gate_override

    @property
    def channels(self) -> int:
        return self.params.channels

    @property
    def state_channels(self) -> int:
        return self.params.channels

    def step(self, drive: Variable, state: Variable) -> Variable:
        return hgru_step(
            drive,
            CellState(h=state),
            self.params,
            bn_eps=self.bn_eps,
            gate_override=self._gate_override,
        ).h

    def hidden(self, state: Variable) -> Variable:
        return state

    def parameters(self) -> dict[str, Variable]:
        return self.params.named()
