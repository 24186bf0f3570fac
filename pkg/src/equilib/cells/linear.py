"""Affine cell ``F(h) = h W^T + x`` for oracle checks against closed forms."""

from __future__ import annotations

import numpy as np

from equilib.errors import ShapeMismatchError
from equilib.tensor import Variable, linear
from equilib.tensor.ops import transpose


class LinearCell:
    """Vector state carried as shape (1, 1, 1, d); the Jacobian is exactly ``W``."""

    kind = "linear"

    def __init__(self, weight: np.ndarray | Variable) -> None:
        if not isinstance(weight, Variable):
            weight = Variable(np.atleast_2d(weight), requires_grad=True, name="W")
        if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
            raise ShapeMismatchError(f"LinearCell needs a square matrix, got shape {weight.shape}")
        self.weight = weight

    @classmethod
    def scalar(cls, a: float) -> LinearCell:
        return cls(np.array([[a]]))

    @classmethod
    def diagonal(cls, entries: list[float] | np.ndarray) -> LinearCell:
        return cls(np.diag(np.asarray(entries, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.weight.shape[0]

    @property
    def channels(self) -> int:
        return self.dim

    @property
    def state_channels(self) -> int:
        return self.dim

    def vector(self, values: np.ndarray | list[float] | float) -> Variable:
        array = np.broadcast_to(np.asarray(values, dtype=np.float64), (self.dim,))
        return Variable(array.reshape(1, 1, 1, self.dim))

    def step(self, drive: Variable, state: Variable) -> Variable:
        return linear(state, transpose(self.weight)) + drive

    def hidden(self, state: Variable) -> Variable:
        return state

    def parameters(self) -> dict[str, Variable]:
        return {"W": self.weight}

    def fixed_point(self, drive: np.ndarray) -> np.ndarray:
        """Closed-form ``(I - W)^{-1} x``."""

        x = np.asarray(drive, dtype=np.float64).reshape(self.dim)
        return np.linalg.solve(np.eye(self.dim) - self.weight.value, x)
