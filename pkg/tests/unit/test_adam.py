from __future__ import annotations

import math

import numpy as np
import pytest

from equilib.errors import NonFiniteError, ShapeMismatchError
from equilib.harness import AdamState, adam_step
from equilib.tensor import Variable


def test_zero_gradient_leaves_parameters() -> None:
    params = {"w": Variable(np.array([[1.0, -2.0]]), requires_grad=True)}
    adam_step(params, {"w": np.zeros((1, 2))}, AdamState(), lr=0.1)
    np.testing.assert_array_equal(params["w"].value, [[1.0, -2.0]])


def test_first_step_moves_by_learning_rate_against_the_sign() -> None:
    params = {"w": Variable(np.array([[0.5, 0.5, 0.5]]), requires_grad=True)}
    adam_step(params, {"w": np.array([[3.0, -0.01, 200.0]])}, AdamState(), lr=1e-3)
    np.testing.assert_allclose(params["w"].value, [[0.499, 0.501, 0.499]], atol=1e-8)


def test_scalar_trace_follows_bias_corrected_moments() -> None:
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    param = Variable(np.array([[1.0]]), requires_grad=True)
    state = AdamState()
    expected, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate([0.5, -0.25, 1.0], start=1):
        adam_step({"p": param}, {"p": np.array([[g]])}, state, lr, b1, b2, eps)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        expected -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        assert param.value[0, 0] == pytest.approx(expected, abs=1e-12)
    assert state.step == 3


def test_gradient_errors_leave_state_untouched() -> None:
    params = {"w": Variable(np.ones((1, 2)), requires_grad=True)}
    state = AdamState()
    with pytest.raises(ShapeMismatchError):
        adam_step(params, {}, state, lr=0.1)
    with pytest.raises(ShapeMismatchError):
        adam_step(params, {"w": np.ones((2, 1))}, state, lr=0.1)
    with pytest.raises(NonFiniteError):
        adam_step(params, {"w": np.array([[np.nan, 0.0]])}, state, lr=0.1)
    assert state.step == 0
    np.testing.assert_array_equal(params["w"].value, np.ones((1, 2)))
