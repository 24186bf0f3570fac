"""Central finite-difference checks for tape gradients."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from .tape import Variable, grad, no_grad

DEFAULT_EPS = 1e-5


@dataclass(frozen=True, slots=True)
class GradCheckRow:
    op_name: str
    param_name: str
    analytic: float
    finite_diff: float
    rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.rel_err <= self.tolerance

    def as_record(self) -> dict[str, object]:
        return {
            "op_name": self.op_name,
            "param_name": self.param_name,
            "analytic": self.analytic,
            "finite_diff": self.finite_diff,
            "rel_err": self.rel_err,
        }


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def _evaluate(loss_fn: Callable[[], Variable]) -> float:
    with no_grad():
        return loss_fn().item()


def directional_check(
    op_name: str,
    loss_fn: Callable[[], Variable],
    params: Mapping[str, Variable],
    *,
    rng: np.random.Generator,
    eps: float = DEFAULT_EPS,
    tolerance: float = 1e-6,
) -> list[GradCheckRow]:
    """Compare ``<grad, d>`` with a central difference along a random unit ``d``.

    ``loss_fn`` must rebuild the loss from the current values of ``params``.
    """

    names = list(params)
    variables = [params[name] for name in names]
    analytic_grads = grad(loss_fn(), variables)
    rows: list[GradCheckRow] = []
    for name, variable, g in zip(names, variables, analytic_grads, strict=True):
        direction = rng.standard_normal(variable.shape)
        direction /= np.linalg.norm(direction) or 1.0
        original = variable.value
        try:
            variable.value = original + eps * direction
            upper = _evaluate(loss_fn)
            variable.value = original - eps * direction
            lower = _evaluate(loss_fn)
        finally:
            variable.value = original
        finite = (upper - lower) / (2.0 * eps)
        analytic = float(np.sum(g.value * direction))
        rows.append(
            GradCheckRow(
                op_name=op_name,
                param_name=name,
                analytic=analytic,
                finite_diff=finite,
                rel_err=relative_error(analytic, finite),
                tolerance=tolerance,
            )
        )
    return rows


def numeric_gradient(
    fn: Callable[[np.ndarray], float], point: np.ndarray, eps: float = DEFAULT_EPS
) -> np.ndarray:
    """Elementwise central-difference gradient of a scalar function."""

    point = np.array(point, dtype=np.float64)
    out = np.zeros_like(point)
    flat = point.reshape(-1)
    out_flat = out.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        upper = fn(point)
        flat[i] = saved - eps
        lower = fn(point)
        flat[i] = saved
        out_flat[i] = (upper - lower) / (2.0 * eps)
    return out
