from __future__ import annotations

import math

import numpy as np
import pytest

from equilib.cells import LinearCell
from equilib.equilibrium import (
    GradAlgorithm,
    LossSpec,
    bptt_grads,
    compute_gradients,
    contraction_ratio,
    fixed_point_residual,
    fixed_point_solve,
    forward_unroll,
    lcp_penalty,
    neumann_adjoint,
    spectral_norm_estimate,
    tbptt_grads,
)
from equilib.errors import (
    DivergenceError,
    EquilibConfigError,
    EquilibNumericalError,
    MissingTrajectoryError,
)
from equilib.tensor import Variable, sum_all
from equilib.tensor.gradcheck import numeric_gradient


def _half_squared(target: float = 0.0) -> LossSpec:
    def objective(state: Variable) -> Variable:
        diff = state - target
        return sum_all(diff * diff) * 0.5

    return LossSpec(objective=objective)


def _unrolled_loss(a: float, x: float, steps: int, target: float = 0.0) -> float:
    h = 0.0
    for _ in range(steps):
        h = a * h + x
    return 0.5 * (h - target) ** 2


@pytest.mark.parametrize(("drive", "expected"), [(0.5, 0.875), (1.0, 1.75)])
def test_unroll_of_scalar_cell(drive: float, expected: float) -> None:
    cell = LinearCell.scalar(0.5)
    result = forward_unroll(cell, cell.vector(drive), cell.vector(0.0), 3, retain=True)
    assert result.state.item() == pytest.approx(expected)
    assert [h.item() for h in result.trajectory] == pytest.approx(
        [drive, 1.5 * drive, 1.75 * drive]
    )
    assert result.steps_taken == 3


def test_unroll_needs_a_step() -> None:
    cell = LinearCell.scalar(0.5)
    with pytest.raises(EquilibConfigError):
        forward_unroll(cell, cell.vector(1.0), cell.vector(0.0), 0)


def test_fixed_point_of_contraction() -> None:
    cell = LinearCell.scalar(0.5)
    x = cell.vector(1.0)
    result = fixed_point_solve(cell, x, cell.vector(0.0), 1e-10, 200)
    assert result.converged
    assert result.state.item() == pytest.approx(2.0, abs=1e-9)
    assert fixed_point_residual(cell, x, result.state) <= 1e-9


def test_expansive_cell_diverges() -> None:
    cell = LinearCell.scalar(2.0)
    with pytest.raises(DivergenceError):
        fixed_point_solve(cell, cell.vector(0.0), cell.vector(1.0), 1e-8, 50)


def test_unconverged_solve_reports_it() -> None:
    cell = LinearCell.scalar(0.9)
    result = fixed_point_solve(cell, cell.vector(1.0), cell.vector(0.0), 1e-12, 5)
    assert not result.converged
    assert result.steps_taken == 5


def test_contraction_ratio_of_linear_cells() -> None:
    half = LinearCell.scalar(0.5)
    x = half.vector(0.3)
    assert contraction_ratio(half, x, half.vector(1.0), half.vector(-1.0)) == pytest.approx(0.5)
    identity = LinearCell.scalar(1.0)
    assert contraction_ratio(identity, x, half.vector(2.0), half.vector(5.0)) == pytest.approx(1.0)
    with pytest.raises(EquilibNumericalError):
        contraction_ratio(half, x, half.vector(1.0), half.vector(1.0))


def test_spectral_norm_of_diagonal_cell() -> None:
    cell = LinearCell.diagonal([0.5, -0.3])
    estimate = spectral_norm_estimate(cell, cell.vector(0.0), cell.vector([1.0, 2.0]))
    assert estimate == pytest.approx(0.5, rel=1e-6)


def test_neumann_series_closed_forms() -> None:
    half = neumann_adjoint(lambda v: 0.5 * v, np.array([1.0]), 100, 1e-12)
    assert half.converged
    assert half.value == pytest.approx([2.0], abs=1e-11)

    zero = neumann_adjoint(lambda v: 0.0 * v, np.array([3.0, -1.0]), 10, 1e-12)
    assert zero.terms_used == 1
    np.testing.assert_array_equal(zero.value, [3.0, -1.0])

    unit = neumann_adjoint(lambda v: v, np.array([1.0]), 20, 1e-8)
    assert not unit.converged
    assert unit.terms_used == 20


def test_neumann_series_matches_dense_solve(rng: np.random.Generator) -> None:
    jacobian = rng.standard_normal((3, 3))
    jacobian *= 0.6 / np.linalg.norm(jacobian, 2)
    seed = rng.standard_normal(3)
    result = neumann_adjoint(lambda v: v @ jacobian, seed, 200, 1e-14)
    exact = np.linalg.solve((np.eye(3) - jacobian).T, seed)
    np.testing.assert_allclose(result.value, exact, atol=1e-8)


def test_neumann_needs_a_term() -> None:
    with pytest.raises(EquilibConfigError):
        neumann_adjoint(lambda v: v, np.array([1.0]), 0, 1e-8)


@pytest.mark.parametrize(
    ("cell", "expected"),
    [
        (LinearCell.scalar(0.5), 0.0),
        (LinearCell.scalar(1.2), 0.3),
        (LinearCell.diagonal([1.5, 1.0]), math.sqrt(0.37)),
    ],
)
def test_lcp_penalty_values(cell: LinearCell, expected: float) -> None:
    value = lcp_penalty(cell, cell.vector(1.0), cell.vector(0.0), 0.9)
    assert value.item() == pytest.approx(expected, abs=1e-12)


def test_lcp_penalty_needs_lambda_below_one() -> None:
    cell = LinearCell.scalar(0.5)
    with pytest.raises(EquilibConfigError):
        lcp_penalty(cell, cell.vector(1.0), cell.vector(0.0), 1.0)


def test_bptt_matches_finite_differences() -> None:
    cell = LinearCell.scalar(0.7)
    x = cell.vector(0.4)
    unrolled = forward_unroll(cell, x, cell.vector(0.0), 6, retain=True)
    result = bptt_grads(unrolled.trajectory, _half_squared(0.1), cell.parameters())
    numeric = numeric_gradient(lambda w: _unrolled_loss(float(w[0, 0]), 0.4, 6, 0.1), np.array([[0.7]]))
    assert result.grads["W"][0, 0] == pytest.approx(numeric[0, 0], rel=1e-7)
    assert result.loss == pytest.approx(_unrolled_loss(0.7, 0.4, 6, 0.1))


def test_tbptt_window_one_sees_only_the_last_step() -> None:
    cell = LinearCell.scalar(0.7)
    x = cell.vector(0.4)
    unrolled = forward_unroll(cell, x, cell.vector(0.0), 5, retain=True)
    states = [h.item() for h in unrolled.trajectory]
    result = tbptt_grads(unrolled.trajectory, _half_squared(), cell.parameters(), 1)
    assert result.grads["W"][0, 0] == pytest.approx(states[-1] * states[-2])

    full = tbptt_grads(unrolled.trajectory, _half_squared(), cell.parameters(), 5)
    bptt = bptt_grads(unrolled.trajectory, _half_squared(), cell.parameters())
    assert full.grads["W"][0, 0] == pytest.approx(bptt.grads["W"][0, 0])


def test_unrolled_gradients_need_a_trajectory() -> None:
    cell = LinearCell.scalar(0.5)
    with pytest.raises(MissingTrajectoryError):
        bptt_grads(None, _half_squared(), cell.parameters())


def test_rbp_gradient_of_scalar_equilibrium() -> None:
    cell = LinearCell.scalar(0.5)
    algorithm = GradAlgorithm(
        kind="rbp", steps=200, neumann_terms=200, neumann_tol=1e-14, solver_tol=1e-13
    )
    result = compute_gradients(
        cell, cell.vector(1.0), cell.vector(0.0), _half_squared(), cell.parameters(), algorithm
    )
    # h* = 2; dL/da = h* * h* / (1 - a)
    assert result.grads["W"][0, 0] == pytest.approx(8.0, rel=1e-9)
    assert result.neumann is not None and result.neumann.converged
    assert result.penalty is None


def test_rbp_agrees_with_long_bptt(rng: np.random.Generator) -> None:
    matrix = rng.standard_normal((3, 3))
    matrix *= 0.5 / np.linalg.norm(matrix, 2)
    cell = LinearCell(matrix)
    x = cell.vector(rng.standard_normal(3))
    loss = _half_squared(0.2)
    implicit = compute_gradients(
        cell,
        x,
        cell.vector(0.0),
        loss,
        cell.parameters(),
        GradAlgorithm(kind="rbp", steps=200, neumann_terms=200, neumann_tol=1e-14, solver_tol=1e-13),
    )
    unrolled = compute_gradients(
        cell, x, cell.vector(0.0), loss, cell.parameters(), GradAlgorithm(kind="bptt", steps=200)
    )
    np.testing.assert_allclose(implicit.grads["W"], unrolled.grads["W"], atol=1e-8)


def test_crbp_adds_the_penalty_gradient() -> None:
    cell = LinearCell.scalar(0.95)
    common = {"steps": 400, "neumann_terms": 400, "neumann_tol": 1e-13, "solver_tol": 1e-12}
    args = (cell, cell.vector(0.1), cell.vector(0.0), _half_squared(), cell.parameters())
    rbp = compute_gradients(*args, GradAlgorithm(kind="rbp", **common))
    crbp = compute_gradients(
        *args, GradAlgorithm(kind="crbp", lam=0.9, penalty_weight=2.0, **common)
    )
    assert crbp.penalty == pytest.approx(0.05)
    # d/da of relu(a - lam) is 1.
    assert crbp.grads["W"][0, 0] - rbp.grads["W"][0, 0] == pytest.approx(2.0, rel=1e-9)


def test_crbp_with_inactive_penalty_equals_rbp() -> None:
    cell = LinearCell.scalar(0.5)
    common = {"steps": 100, "neumann_terms": 100, "neumann_tol": 1e-14, "solver_tol": 1e-13}
    args = (cell, cell.vector(1.0), cell.vector(0.0), _half_squared(), cell.parameters())
    rbp = compute_gradients(*args, GradAlgorithm(kind="rbp", **common))
    crbp = compute_gradients(*args, GradAlgorithm(kind="crbp", lam=0.9, **common))
    assert crbp.penalty == 0.0
    np.testing.assert_array_equal(crbp.grads["W"], rbp.grads["W"])


def test_cbptt_reports_penalty_at_the_last_iterate() -> None:
    cell = LinearCell.scalar(1.2)
    result = compute_gradients(
        cell,
        cell.vector(0.1),
        cell.vector(0.0),
        _half_squared(),
        cell.parameters(),
        GradAlgorithm(kind="cbptt", steps=3, lam=0.9),
    )
    assert result.penalty == pytest.approx(0.3)


@pytest.mark.parametrize(
    "settings",
    [
        {"kind": "adjoint"},
        {"steps": 0},
        {"kind": "tbptt", "steps": 2, "window": 3},
        {"lam": 1.0},
        {"neumann_terms": 0},
        {"penalty_weight": -1.0},
        {"kind": "rbp", "per_step_loss": True},
    ],
)
def test_algorithm_validation(settings: dict[str, object]) -> None:
    with pytest.raises(EquilibConfigError):
        GradAlgorithm.from_settings(settings)


def test_per_step_loss_averages_every_state() -> None:
    cell = LinearCell.scalar(0.5)
    unrolled = forward_unroll(cell, cell.vector(1.0), cell.vector(0.0), 2, retain=True)
    loss = LossSpec(objective=_half_squared().objective, per_step=True)
    # states 1.0 and 1.5
    assert loss.evaluate(unrolled.trajectory).item() == pytest.approx((0.5 + 1.125) / 2)


def test_tbptt_truncates_inside_the_unroll() -> None:
    a, drive = 0.7, 0.4
    cell = LinearCell.scalar(a)
    unrolled = forward_unroll(cell, cell.vector(drive), cell.vector(0.0), 5, retain=True)
    _, _, h3, h4, h5 = (h.item() for h in unrolled.trajectory)
    # Window 2: h5 = a h4 + x and h4 = a h3 + x, with h3 held fixed.
    expected = h5 * (h4 + a * h3)

    result = tbptt_grads(unrolled.trajectory, _half_squared(), cell.parameters(), 2)
    assert result.grads["W"][0, 0] == pytest.approx(expected, rel=1e-12)
    full = bptt_grads(unrolled.trajectory, _half_squared(), cell.parameters())
    assert full.grads["W"][0, 0] > result.grads["W"][0, 0]

    windowed = compute_gradients(
        cell,
        cell.vector(drive),
        cell.vector(0.0),
        _half_squared(),
        cell.parameters(),
        GradAlgorithm(kind="tbptt", steps=5, window=2),
    )
    assert windowed.grads["W"][0, 0] == pytest.approx(expected, rel=1e-12)


def test_neumann_error_shrinks_geometrically(rng: np.random.Generator) -> None:
    rho = 0.7
    basis, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    jacobian = basis @ np.diag([rho, -0.5, 0.3, 0.1]) @ basis.T
    seed = rng.standard_normal(4)
    exact = np.linalg.solve(np.eye(4) - jacobian, seed)
    scale = np.linalg.norm(exact)

    errors = [
        float(np.linalg.norm(neumann_adjoint(lambda v: v @ jacobian, seed, k, 0.0).value - exact))
        for k in range(1, 13)
    ]
    constant = errors[0] / (rho * scale)
    for k, error in enumerate(errors, start=1):
        assert error <= rho**k * scale * constant * (1.0 + 1e-9)
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))


def test_lcp_penalty_is_zero_exactly_when_the_diagonal_stays_below_lambda(
    rng: np.random.Generator,
) -> None:
    lam = 0.9
    for _ in range(50):
        entries = rng.uniform(-1.5, 1.5, size=int(rng.integers(1, 5)))
        if rng.uniform() < 0.25:
            entries[0] = lam
        cell = LinearCell.diagonal(entries)
        value = lcp_penalty(cell, cell.vector(1.0), cell.vector(0.0), lam).item()
        assert (value == 0.0) == bool(np.all(entries <= lam))
        assert value == pytest.approx(np.linalg.norm(np.maximum(entries - lam, 0.0)), abs=1e-12)
