from __future__ import annotations

import numpy as np
import pytest

from equilib.errors import NonFiniteError, NotAncestorError, ShapeMismatchError
from equilib.tensor import (
    Tape,
    Variable,
    backward,
    grad,
    linear,
    no_grad,
    recording,
    softplus,
    sum_all,
    vjp,
)


def test_vjp_of_explicit_matrix_matches_transpose_multiply(rng: np.random.Generator) -> None:
    a = rng.standard_normal((3, 3))
    h = Variable(rng.standard_normal((1, 3)), requires_grad=True)
    y = linear(h, Variable(a.T))
    v = rng.standard_normal((1, 3))
    (pulled,) = vjp(y, v, [h])
    np.testing.assert_allclose(pulled.value, v @ a, rtol=0, atol=1e-14)


def test_vjp_identity_and_zero_cotangent() -> None:
    h = Variable(np.array([[1.0, -2.0]]), requires_grad=True)
    y = h * 1.0
    (same,) = vjp(y, np.array([[3.0, 4.0]]), [h])
    np.testing.assert_array_equal(same.value, [[3.0, 4.0]])
    (zero,) = vjp(y, np.zeros((1, 2)), [h])
    np.testing.assert_array_equal(zero.value, [[0.0, 0.0]])


def test_vjp_is_linear_in_cotangent(rng: np.random.Generator) -> None:
    w = Variable(rng.standard_normal((4, 4)))
    h = Variable(rng.standard_normal((2, 4)), requires_grad=True)
    y = softplus(linear(h, w))
    u, v = rng.standard_normal((2, 2, 4))
    (combined,) = vjp(y, 2.0 * u - 3.0 * v, [h])
    (gu,) = vjp(y, u, [h])
    (gv,) = vjp(y, v, [h])
    np.testing.assert_allclose(combined.value, 2.0 * gu.value - 3.0 * gv.value, atol=1e-12)


def test_grad_of_half_squared_norm_is_identity(rng: np.random.Generator) -> None:
    w = Variable(rng.standard_normal((1, 2, 2, 3)), requires_grad=True)
    (g,) = grad(sum_all(w * w) * 0.5, [w])
    np.testing.assert_allclose(g.value, w.value, atol=1e-15)


def test_grad_of_constant_is_zero() -> None:
    w = Variable(np.ones((1, 1, 1, 2)), requires_grad=True)
    loss = sum_all(Variable(np.ones((1, 1, 1, 2))))
    (g,) = backward([loss], [np.ones(loss.shape)], [w], allow_unused=True)
    np.testing.assert_array_equal(g.value, np.zeros((1, 1, 1, 2)))


def test_grad_rejects_non_ancestor() -> None:
    w = Variable(np.ones((1, 1, 1, 1)), requires_grad=True)
    other = Variable(np.ones((1, 1, 1, 1)), requires_grad=True)
    with pytest.raises(NotAncestorError):
        grad(sum_all(w * 2.0), [other])


def test_grad_needs_scalar_output() -> None:
    w = Variable(np.ones((1, 1, 1, 2)), requires_grad=True)
    with pytest.raises(ShapeMismatchError):
        grad(w * 2.0, [w])


def test_cotangent_shape_is_checked() -> None:
    w = Variable(np.ones((1, 2)), requires_grad=True)
    with pytest.raises(ShapeMismatchError):
        vjp(w * 2.0, np.ones((2, 1)), [w])


def test_no_grad_does_not_record() -> None:
    w = Variable(np.ones((1, 1, 1, 2)), requires_grad=True)
    with Tape() as tape:
        with no_grad():
            y = w * 3.0
        assert tape.record_count == 0
    assert y.requires_grad is False
    assert y.node is None


def test_tape_counts_saved_bytes_per_record() -> None:
    a = Variable(np.ones((2, 3)), requires_grad=True)
    b = Variable(np.ones((2, 3)), requires_grad=True)
    with Tape(retain=False) as tape:
        _ = a * b
    assert tape.record_count == 1
    assert tape.saved_bytes == 2 * a.value.nbytes
    assert tape.peak_bytes == tape.saved_bytes
    assert tape.nodes == []


def test_create_graph_records_the_vjp() -> None:
    w = Variable(np.array([[0.7]]), requires_grad=True)
    h = Variable(np.array([[0.3]]), requires_grad=True)
    with recording(True):
        y = softplus(w * h)
        (dh,) = backward([y], [np.ones((1, 1))], [h], create_graph=True)
    assert dh.requires_grad
    (dw,) = grad(sum_all(dh), [w])
    # d/dw [w * sigmoid(w h)] = sigmoid + w h sigmoid (1 - sigmoid)
    s = 1.0 / (1.0 + np.exp(-0.21))
    assert dw.item() == pytest.approx(s + 0.21 * s * (1.0 - s), rel=1e-12)


def test_non_finite_result_raises_with_op_name() -> None:
    x = Variable(np.array([[0.0]]), requires_grad=True)
    with pytest.raises(NonFiniteError, match="power"):
        _ = x**-1.0
