"""Gradient-check suites run by ``equilib gradcheck``."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from equilib.cells import (
    CellState,
    ConvLstmParams,
    HGruCell,
    HGruParams,
    LinearCell,
    conv_lstm_step,
)
from equilib.errors import EquilibConfigError
from equilib.tensor import (
    Variable,
    as_kernel,
    batch_norm,
    channel_vector,
    conv2d,
    pointwise,
    sum_all,
)
from equilib.tensor.gradcheck import GradCheckRow, directional_check, relative_error

from .dynamics import fixed_point_solve, forward_unroll
from .gradients import bptt_grads, lcp_penalty, rbp_grads
from .types import GradAlgorithm, LossSpec

SUITES = ("linear", "hgru", "lcp")

LINEAR_TOLERANCE = 1e-4
OP_TOLERANCE = 1e-5


def random_contraction(rng: np.random.Generator, dim: int, norm: float) -> np.ndarray:
    """Random matrix rescaled to spectral norm ``norm``."""

    matrix = rng.standard_normal((dim, dim))
    return matrix * (norm / np.linalg.norm(matrix, 2))


def _squared_error(target: np.ndarray) -> Callable[[Variable], Variable]:
    def objective(state: Variable) -> Variable:
        diff = state - target.reshape(state.shape)
        return sum_all(diff * diff) * 0.5

    return objective


def _compare(
    op: str,
    name: str,
    a: np.ndarray,
    b: np.ndarray,
    direction: np.ndarray,
    tol: float,
) -> GradCheckRow:
    lhs = float(np.sum(a * direction))
    rhs = float(np.sum(b * direction))
    return GradCheckRow(
        op_name=op,
        param_name=name,
        analytic=lhs,
        finite_diff=rhs,
        rel_err=relative_error(lhs, rhs),
        tolerance=tol,
    )


def linear_suite(rng: np.random.Generator, systems: int = 20) -> list[GradCheckRow]:
    """RBP against the closed-form implicit gradient and a 500-step BPTT."""

    algorithm = GradAlgorithm(
        kind="rbp", steps=500, neumann_terms=500, neumann_tol=1e-13, solver_tol=1e-13
    )
    rows: list[GradCheckRow] = []
    for index in range(systems):
        dim = int(rng.integers(2, 9))
        norm = float(rng.uniform(0.1, 0.8))
        cell = LinearCell(random_contraction(rng, dim, norm))
        x = cell.vector(rng.standard_normal(dim))
        target = rng.standard_normal(dim)
        loss = LossSpec(objective=_squared_error(target))
        params = cell.parameters()
        h0 = cell.vector(0.0)

        solved = fixed_point_solve(cell, x, h0, algorithm.solver_tol, algorithm.steps)
        rbp = rbp_grads(cell, x, solved.state, loss, params, algorithm).grads["W"]

        h_star = cell.fixed_point(x.value)
        adjoint = np.linalg.solve((np.eye(dim) - cell.weight.value).T, h_star - target)
        exact = np.outer(adjoint, h_star)

        unrolled = forward_unroll(cell, x, h0, algorithm.steps, retain=True)
        bptt = bptt_grads(unrolled.trajectory, loss, params).grads["W"]

        direction = rng.standard_normal((dim, dim))
        name = f"W[system={index},dim={dim}]"
        rows.append(_compare("rbp_vs_implicit", name, rbp, exact, direction, LINEAR_TOLERANCE))
        rows.append(_compare("rbp_vs_bptt500", name, rbp, bptt, direction, LINEAR_TOLERANCE))
    return rows


def _hgru_fixture(rng: np.random.Generator, channels: int = 2, kernel: int = 3, size: int = 5):
    params = HGruParams.initialize(rng, channels, kernel)
    # Unit BN scale keeps every path well above rounding noise.
    for name in ("bn_s_scale", "bn_f_scale"):
        getattr(params, name).value = np.ones((1, 1, 1, channels))
    z = Variable(rng.uniform(0.0, 1.0, (2, size, size, channels)), requires_grad=True)
    h0 = Variable(rng.uniform(0.0, 1.0, (2, size, size, channels)))
    weights = rng.standard_normal((2, size, size, channels))
    return params, z, h0, weights


def hgru_suite(rng: np.random.Generator) -> list[GradCheckRow]:
    """Finite differences for every op and for a 2-step hGRU unroll."""

    rows: list[GradCheckRow] = []

    x = Variable(rng.standard_normal((2, 5, 5, 3)), requires_grad=True)
    kernel = as_kernel(rng.standard_normal((3, 3, 3, 2)))
    weights = rng.standard_normal((2, 5, 5, 2))
    rows += directional_check(
        "conv2d",
        lambda: sum_all(conv2d(x, kernel) * weights),
        {"input": x, "kernel": kernel},
        rng=rng,
        tolerance=OP_TOLERANCE,
    )

    for fn in ("softplus", "sigmoid", "tanh"):
        rows += directional_check(
            fn,
            lambda fn=fn: sum_all(pointwise(x, fn) * x),
            {"input": x},
            rng=rng,
            tolerance=OP_TOLERANCE,
        )

    scale = channel_vector(rng.uniform(0.5, 1.5, 3), 3)
    bias = channel_vector(rng.standard_normal(3), 3)
    weights = rng.standard_normal(x.shape)
    rows += directional_check(
        "batch_norm",
        lambda: sum_all(batch_norm(x, scale, bias) * weights),
        {"input": x, "scale": scale, "bias": bias},
        rng=rng,
        tolerance=OP_TOLERANCE,
    )

    params, z, h0, hgru_weights = _hgru_fixture(rng)
    cell = HGruCell(params)

    def two_steps() -> Variable:
        unrolled = forward_unroll(cell, z, h0, 2)
        return sum_all(unrolled.state * hgru_weights)

    rows += directional_check(
        "hgru_step x2",
        two_steps,
        {"z": z, **params.named()},
        rng=rng,
        tolerance=OP_TOLERANCE,
    )

    lstm = ConvLstmParams.initialize(rng, 2, 3)
    drive = Variable(rng.standard_normal((2, 4, 4, 2)), requires_grad=True)
    h = Variable(rng.standard_normal((2, 4, 4, 2)), requires_grad=True)
    c = Variable(rng.standard_normal((2, 4, 4, 2)), requires_grad=True)
    lstm_weights = rng.standard_normal((2, 4, 4, 4))

    def lstm_loss() -> Variable:
        out = conv_lstm_step(drive, CellState(h=h, c=c), lstm).pack()
        return sum_all(out * lstm_weights)

    rows += directional_check(
        "conv_lstm_step",
        lstm_loss,
        {"x": drive, "h": h, "c": c, **lstm.named()},
        rng=rng,
        tolerance=OP_TOLERANCE,
    )
    return rows


def lcp_suite(rng: np.random.Generator) -> list[GradCheckRow]:
    """Double-backward through the penalty, checked by finite differences."""

    rows: list[GradCheckRow] = []

    scalar = LinearCell.scalar(1.2)
    drive = scalar.vector(1.0)
    rows += directional_check(
        "lcp scalar a=1.2",
        lambda: lcp_penalty(scalar, drive, scalar.vector(0.0), 0.9),
        scalar.parameters(),
        rng=rng,
        tolerance=OP_TOLERANCE,
    )

    params, z, h0, _ = _hgru_fixture(rng)
    cell = HGruCell(params)
    rows += directional_check(
        "lcp hgru",
        lambda: lcp_penalty(cell, z, h0, 0.0),
        {"z": z, **params.named()},
        rng=rng,
        tolerance=OP_TOLERANCE,
    )
    return rows


def run_suite(name: str, seed: int = 0) -> list[GradCheckRow]:
    rng = np.random.default_rng(seed)
    if name == "linear":
        return linear_suite(rng)
    if name == "hgru":
        return hgru_suite(rng)
    if name == "lcp":
        return lcp_suite(rng)
    raise EquilibConfigError(
        f"Unknown gradcheck suite: {name}",
        hint=f"Choose one of {', '.join(SUITES)}.",
    )
