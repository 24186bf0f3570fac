"""Forward dynamics of a recurrent cell and contraction diagnostics."""

from __future__ import annotations

import logging

import numpy as np

from equilib.cells.base import RecurrentCell
from equilib.errors import (
    DivergenceError,
    EquilibConfigError,
    EquilibNumericalError,
    NonFiniteError,
)
from equilib.logging import get_logger
from equilib.tensor import Variable, backward, no_grad, recording

from .types import EquilibriumResult

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_WINDOW = 10


def _distance(a: Variable, b: Variable) -> float:
    return float(np.linalg.norm(a.value - b.value))


def _step(cell: RecurrentCell, x: Variable, h: Variable, t: int) -> Variable:
    try:
        return cell.step(x, h)
    except NonFiniteError as exc:
        raise NonFiniteError(
            f"Non-finite hidden state at step {t}: {exc}",
            hint="The dynamics blew up; lower the learning rate or use a contractive algorithm.",
        ) from exc


def forward_unroll(
    cell: RecurrentCell,
    x: Variable,
    h0: Variable,
    steps: int,
    *,
    retain: bool = False,
    track_last: int | None = None,
    tol: float = 0.0,
) -> EquilibriumResult:
    """Apply ``h_{t+1} = F(x, h_t)`` ``steps`` times.

    Steps are recorded on the current tape unless it is paused. ``track_last``
    pauses recording for all but the final ``track_last`` steps. The trajectory
    holds ``h_1 .. h_N``.
    """

    if steps < 1:
        raise EquilibConfigError(f"forward_unroll needs steps >= 1, got {steps}")
    untracked = 0 if track_last is None else max(steps - track_last, 0)
    trajectory: list[Variable] = []
    residuals: list[float] = []
    h = h0
    for t in range(1, steps + 1):
        if t <= untracked:
            with no_grad():
                h_next = _step(cell, x, h, t)
        else:
            h_next = _step(cell, x, h, t)
        residuals.append(_distance(h_next, h))
        h = h_next
        if retain:
            trajectory.append(h)
    return EquilibriumResult(
        state=h,
        residual=residuals[-1],
        steps_taken=steps,
        converged=residuals[-1] <= tol,
        trajectory=trajectory if retain else None,
        residuals=residuals,
    )


def fixed_point_solve(
    cell: RecurrentCell,
    x: Variable,
    h0: Variable,
    tol: float,
    max_steps: int,
    *,
    check_divergence: bool = True,
    retain: bool = False,
    logger: logging.Logger | None = None,
) -> EquilibriumResult:
    """Iterate the cell without recording until the step residual is <= ``tol``."""

    if tol <= 0:
        raise EquilibConfigError(f"fixed_point_solve needs tol > 0, got {tol}")
    if max_steps < 1:
        raise EquilibConfigError(f"fixed_point_solve needs max_steps >= 1, got {max_steps}")
    logger = logger or get_logger("equilib.equilibrium")

    h = h0.detach()
    residuals: list[float] = []
    trajectory: list[Variable] = []
    converged = False
    with no_grad():
        for t in range(1, max_steps + 1):
            h_next = _step(cell, x, h, t)
            residual = _distance(h_next, h)
            residuals.append(residual)
            h = h_next
            if retain:
                trajectory.append(h)
            if residual <= tol:
                converged = True
                break
            if (
                check_divergence
                and t > DIVERGENCE_WINDOW
                and residual > DIVERGENCE_FACTOR * residuals[t - 1 - DIVERGENCE_WINDOW]
            ):
                raise DivergenceError(
                    f"Fixed-point iteration diverged at step {t}: residual {residual:.3e} "
                    f"grew more than {DIVERGENCE_FACTOR:g}x over {DIVERGENCE_WINDOW} steps",
                    hint="The cell is expansive here; train with crbp or lower algorithm.lam.",
                )
    if not converged:
        logger.warning(
            "Fixed-point solve stopped after %d steps with residual %.3e (tol %.1e)",
            len(residuals),
            residuals[-1],
            tol,
        )
    return EquilibriumResult(
        state=h,
        residual=residuals[-1],
        steps_taken=len(residuals),
        converged=converged,
        trajectory=trajectory if retain else None,
        residuals=residuals,
    )


def fixed_point_residual(cell: RecurrentCell, x: Variable, h: Variable) -> float:
    """``||h - F(x, h)||``; zero exactly at an equilibrium."""

    with no_grad():
        return _distance(h, cell.step(x, h))


def contraction_ratio(
    cell: RecurrentCell, x: Variable, h1: Variable, h2: Variable
) -> float:
    """``||F(h1) - F(h2)|| / ||h1 - h2||``."""

    gap = _distance(h1, h2)
    if gap == 0.0:
        raise EquilibNumericalError(
            "contraction_ratio needs two distinct states (0/0)",
            hint="Perturb one of the states before measuring the ratio.",
        )
    with no_grad():
        return _distance(cell.step(x, h1), cell.step(x, h2)) / gap


def spectral_norm_estimate(
    cell: RecurrentCell,
    x: Variable,
    h: Variable,
    *,
    iters: int = 20,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest singular value of ``dF/dh`` at ``h`` by power iteration on ``J^T J``.

    ``J v`` comes from differentiating a VJP with respect to its cotangent.
    """

    rng = rng or np.random.default_rng(0)
    x = x.detach()
    leaf = Variable(h.value, requires_grad=True)
    with recording(True):
        out = cell.step(x, leaf)
    cotangent = Variable(np.zeros(out.shape), requires_grad=True)
    (transposed,) = backward(
        [out], [cotangent], [leaf], create_graph=True, allow_unused=True
    )

    v = rng.standard_normal(leaf.shape)
    v /= np.linalg.norm(v)
    sigma_sq = 0.0
    for _ in range(iters):
        (jv,) = backward([transposed], [v], [cotangent], allow_unused=True)
        (jtjv,) = backward([out], [jv.value], [leaf], allow_unused=True)
        sigma_sq = float(np.linalg.norm(jtjv.value))
        if sigma_sq == 0.0:
            return 0.0
        v = jtjv.value / sigma_sq
    return float(np.sqrt(sigma_sq))
