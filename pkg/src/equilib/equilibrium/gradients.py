"""Gradient estimators for recurrent cells.

All estimators return plain arrays keyed like ``params``. ``bptt`` and
``tbptt`` differentiate the recorded unroll; ``rbp`` and ``crbp`` record a
single step at the equilibrium and solve the adjoint with a Neumann series.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import replace

import numpy as np

from equilib.cells.base import RecurrentCell
from equilib.errors import EquilibConfigError, MissingTrajectoryError, ShapeMismatchError
from equilib.logging import get_logger
from equilib.tensor import Variable, backward, l2_norm, recording, relu

from .dynamics import fixed_point_solve, forward_unroll
from .types import EquilibriumResult, GradAlgorithm, GradResult, LossSpec, NeumannResult

VjpFn = Callable[[np.ndarray], np.ndarray]


def _collect(names: Sequence[str], grads: Sequence[Variable]) -> dict[str, np.ndarray]:
    return {name: g.value.copy() for name, g in zip(names, grads, strict=True)}


def _accumulate(
    total: dict[str, np.ndarray], extra: Mapping[str, np.ndarray], weight: float = 1.0
) -> dict[str, np.ndarray]:
    return {name: total[name] + weight * extra[name] for name in total}


def _require_trajectory(trajectory: Sequence[Variable] | None) -> list[Variable]:
    if not trajectory:
        raise MissingTrajectoryError(
            "Unrolled gradients need the recorded trajectory",
            hint="Run forward_unroll with retain=True while recording.",
        )
    return list(trajectory)


def bptt_grads(
    trajectory: Sequence[Variable] | None,
    loss: LossSpec,
    params: Mapping[str, Variable],
) -> GradResult:
    states = _require_trajectory(trajectory)
    names = list(params)
    value = loss.evaluate(states)
    grads = backward([value], [np.ones(value.shape)], [params[n] for n in names], allow_unused=True)
    return GradResult(grads=_collect(names, grads), loss=value.item())


def tbptt_grads(
    trajectory: Sequence[Variable] | None,
    loss: LossSpec,
    params: Mapping[str, Variable],
    window: int,
) -> GradResult:
    """Backprop through only the last ``window`` steps of the unroll."""

    states = _require_trajectory(trajectory)
    steps = len(states)
    if not 1 <= window <= steps:
        raise ShapeMismatchError(
            f"Truncation window {window} is outside 1..{steps}",
            hint="Choose algorithm.window between 1 and algorithm.steps.",
        )
    stop = [states[steps - window - 1]] if window < steps else []
    names = list(params)
    value = loss.evaluate(states)
    grads = backward(
        [value],
        [np.ones(value.shape)],
        [params[n] for n in names],
        stop=stop,
        allow_unused=True,
    )
    return GradResult(grads=_collect(names, grads), loss=value.item())


def neumann_adjoint(
    vjp_fn: VjpFn,
    seed: np.ndarray,
    terms: int,
    tol: float,
    *,
    logger: logging.Logger | None = None,
) -> NeumannResult:
    """Approximate ``seed (I - J)^{-1}`` by ``v <- seed + v J``.

    Stops after ``terms`` updates or once an update moves ``v`` by at most ``tol``.
    """

    if terms < 1:
        raise EquilibConfigError(f"neumann_adjoint needs terms >= 1, got {terms}")
    seed = np.asarray(seed, dtype=np.float64)
    v = seed
    delta = float("inf")
    for k in range(1, terms + 1):
        v_next = seed + vjp_fn(v)
        delta = float(np.linalg.norm(v_next - v))
        v = v_next
        if delta <= tol:
            return NeumannResult(value=v, terms_used=k, converged=True, residual=delta)
    (logger or get_logger("equilib.equilibrium")).warning(
        "Neumann series did not converge in %d terms (last update %.3e)", terms, delta
    )
    return NeumannResult(value=v, terms_used=terms, converged=False, residual=delta)


def rbp_grads(
    cell: RecurrentCell,
    x: Variable,
    h_star: Variable,
    loss: LossSpec,
    params: Mapping[str, Variable],
    algorithm: GradAlgorithm,
    *,
    logger: logging.Logger | None = None,
) -> GradResult:
    """Implicit-function gradients at an equilibrium.

    One tracked step ``F(x, h*)`` exposes both ``J`` and ``dF/dw``; nothing from
    the solve itself is recorded.
    """

    names = list(params)
    variables = [params[n] for n in names]
    leaf = Variable(h_star.value, requires_grad=True)
    with recording(True):
        h_next = cell.step(x, leaf)
        value = loss.evaluate([h_next])

    direct = backward(
        [value],
        [np.ones(value.shape)],
        [h_next, *variables],
        stop=[h_next],
        allow_unused=True,
    )
    seed = direct[0].value

    def vjp_fn(v: np.ndarray) -> np.ndarray:
        (pulled,) = backward([h_next], [v], [leaf], allow_unused=True)
        return pulled.value

    adjoint = neumann_adjoint(
        vjp_fn, seed, algorithm.neumann_terms, algorithm.neumann_tol, logger=logger
    )
    implicit = backward([h_next], [adjoint.value], variables, allow_unused=True)
    grads = {
        name: d.value + i.value
        for name, d, i in zip(names, direct[1:], implicit, strict=True)
    }
    return GradResult(grads=grads, loss=value.item(), neumann=adjoint)


def lcp_penalty(cell: RecurrentCell, x: Variable, h_eval: Variable, lam: float) -> Variable:
    """``||(1 J - lam)_+||_2`` with ``J = dF/dh`` at ``h_eval``.

    The inner VJP is recorded, so the result is differentiable in the cell
    parameters.
    """

    if not 0.0 <= lam < 1.0:
        raise EquilibConfigError(f"lcp_penalty needs lam in [0, 1), got {lam}")
    leaf = Variable(h_eval.value, requires_grad=True)
    with recording(True):
        out = cell.step(x, leaf)
        (row_sums,) = backward(
            [out], [np.ones(out.shape)], [leaf], create_graph=True, allow_unused=True
        )
        return l2_norm(relu(row_sums - lam))


def _penalty_grads(
    cell: RecurrentCell,
    x: Variable,
    h_eval: Variable,
    params: Mapping[str, Variable],
    algorithm: GradAlgorithm,
) -> tuple[dict[str, np.ndarray], float]:
    names = list(params)
    penalty = lcp_penalty(cell, x, h_eval, algorithm.lam)
    if algorithm.penalty_weight == 0.0:
        return {name: np.zeros(params[name].shape) for name in names}, penalty.item()
    grads = backward(
        [penalty], [np.ones(penalty.shape)], [params[n] for n in names], allow_unused=True
    )
    return _collect(names, grads), penalty.item()


def crbp_grads(
    cell: RecurrentCell,
    x: Variable,
    h_star: Variable,
    loss: LossSpec,
    params: Mapping[str, Variable],
    algorithm: GradAlgorithm,
    *,
    logger: logging.Logger | None = None,
) -> GradResult:
    """RBP on the task loss plus ordinary backprop through the penalty graph."""

    result = rbp_grads(cell, x, h_star, loss, params, algorithm, logger=logger)
    penalty_grads, penalty = _penalty_grads(cell, x, h_star, params, algorithm)
    result.grads = _accumulate(result.grads, penalty_grads, algorithm.penalty_weight)
    result.penalty = penalty
    return result


def cbptt_grads(
    cell: RecurrentCell,
    x: Variable,
    trajectory: Sequence[Variable] | None,
    loss: LossSpec,
    params: Mapping[str, Variable],
    algorithm: GradAlgorithm,
) -> GradResult:
    """BPTT on the task loss plus the penalty at the final iterate."""

    result = bptt_grads(trajectory, loss, params)
    states = _require_trajectory(trajectory)
    penalty_grads, penalty = _penalty_grads(cell, x, states[-1], params, algorithm)
    result.grads = _accumulate(result.grads, penalty_grads, algorithm.penalty_weight)
    result.penalty = penalty
    return result


def compute_gradients(
    cell: RecurrentCell,
    x: Variable,
    h0: Variable,
    loss: LossSpec,
    params: Mapping[str, Variable],
    algorithm: GradAlgorithm,
    *,
    logger: logging.Logger | None = None,
) -> GradResult:
    """Run the forward pass ``algorithm`` needs, then its gradient estimator."""

    logger = logger or get_logger("equilib.equilibrium")
    steps = algorithm.steps
    if algorithm.implicit:
        forward = _solve_for_implicit(cell, x, h0, algorithm, logger)
        estimator = crbp_grads if algorithm.kind == "crbp" else rbp_grads
        result = estimator(cell, x, forward.state, loss, params, algorithm, logger=logger)
        return replace(result, forward=forward)

    track_last = algorithm.window if algorithm.kind == "tbptt" else None
    forward = forward_unroll(cell, x, h0, steps, retain=True, track_last=track_last)
    if algorithm.kind == "bptt":
        result = bptt_grads(forward.trajectory, loss, params)
    elif algorithm.kind == "tbptt":
        result = tbptt_grads(forward.trajectory, loss, params, algorithm.window)
    else:
        result = cbptt_grads(cell, x, forward.trajectory, loss, params, algorithm)
    return replace(result, forward=forward)


def _solve_for_implicit(
    cell: RecurrentCell,
    x: Variable,
    h0: Variable,
    algorithm: GradAlgorithm,
    logger: logging.Logger,
) -> EquilibriumResult:
    # The estimator itself applies the final (tracked) step.
    if algorithm.steps == 1:
        return EquilibriumResult(
            state=h0.detach(), residual=float("nan"), steps_taken=0, converged=False
        )
    return fixed_point_solve(
        cell,
        x,
        h0,
        algorithm.solver_tol,
        algorithm.steps - 1,
        check_divergence=False,
        logger=logger,
    )
