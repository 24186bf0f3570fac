"""Adam with bias correction over named Variables."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from equilib.errors import NonFiniteError, ShapeMismatchError
from equilib.tensor import Variable


@dataclass(slots=True)
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Variable],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """Update ``params`` in place and return the advanced state."""

    for name, param in params.items():
        if name not in grads:
            raise ShapeMismatchError(f"No gradient for parameter {name!r}")
        if np.shape(grads[name]) != param.shape:
            raise ShapeMismatchError(
                f"Gradient for {name!r} has shape {np.shape(grads[name])}, expected {param.shape}"
            )
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteError(f"Gradient for {name!r} holds NaN or Inf values")

    state.step += 1
    bias1 = 1.0 - beta1**state.step
    bias2 = 1.0 - beta2**state.step
    for name, param in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - beta1) * g if m is None else beta1 * m + (1.0 - beta1) * g
        v = (1.0 - beta2) * g * g if v is None else beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        param.value = param.value - lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
    return state
