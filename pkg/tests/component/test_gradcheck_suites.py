from __future__ import annotations

import pytest

from equilib.equilibrium.suites import LINEAR_TOLERANCE, OP_TOLERANCE, SUITES, run_suite
from equilib.errors import EquilibConfigError


@pytest.mark.parametrize("suite", SUITES)
def test_suite_passes(suite: str) -> None:
    rows = run_suite(suite, seed=0)
    assert rows
    failed = [row for row in rows if not row.passed]
    assert failed == []


def test_linear_suite_rows() -> None:
    rows = run_suite("linear", seed=3)
    assert len(rows) == 40
    assert {row.op_name for row in rows} == {"rbp_vs_implicit", "rbp_vs_bptt500"}
    assert all(row.tolerance == LINEAR_TOLERANCE for row in rows)


def test_op_suite_covers_every_primitive() -> None:
    ops = {row.op_name for row in run_suite("hgru", seed=1)}
    assert {"conv2d", "softplus", "sigmoid", "tanh", "batch_norm", "conv_lstm_step"} <= ops
    assert all(row.tolerance == OP_TOLERANCE for row in run_suite("lcp", seed=1))


def test_unknown_suite() -> None:
    with pytest.raises(EquilibConfigError):
        run_suite("everything")
