from __future__ import annotations

import logging

import numpy as np
import pytest

from equilib.errors import EmptyDatasetError, EquilibConfigError
from equilib.harness import fit_pca, ks_two_sample, project_states


def test_ks_statistic_of_shifted_samples() -> None:
    result = ks_two_sample([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])
    assert result.statistic == pytest.approx(1.0 / 3.0)
    assert 0.0 < result.p_value <= 1.0


def test_ks_of_fully_separated_samples() -> None:
    result = ks_two_sample([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    assert result.statistic == 1.0
    assert result.p_value < 0.1


def test_ks_of_identical_samples() -> None:
    result = ks_two_sample([0.3, 0.1, 0.2], [0.1, 0.2, 0.3])
    assert result.statistic == 0.0
    assert result.p_value == 1.0


def test_ks_needs_both_samples() -> None:
    with pytest.raises(EmptyDatasetError):
        ks_two_sample([], [1.0])


def test_pca_recovers_a_planted_plane(rng: np.random.Generator) -> None:
    basis, _ = np.linalg.qr(rng.standard_normal((5, 2)))
    coeffs = rng.standard_normal((40, 2)) * [3.0, 1.0]
    points = coeffs @ basis.T + rng.standard_normal(5)
    fit = fit_pca(points, 2)
    assert fit.rank == 2
    np.testing.assert_allclose(fit.inverse_transform(fit.transform(points)), points, atol=1e-8)
    assert fit.variances[0] >= fit.variances[1]


def test_pca_warns_on_rank_deficiency(caplog: pytest.LogCaptureFixture) -> None:
    points = np.outer(np.arange(6.0), [1.0, 2.0, 0.0])
    logger = logging.getLogger("tests.pca")
    with caplog.at_level(logging.WARNING, logger="tests.pca"):
        fit = fit_pca(points, 2, logger=logger)
    assert fit.rank == 1
    assert "rank 1" in caplog.text


def test_pca_rejects_empty_input() -> None:
    with pytest.raises(EmptyDatasetError):
        fit_pca(np.zeros((0, 3)))


def test_distances_are_invariant_to_channel_rotation(rng: np.random.Generator) -> None:
    pooled = rng.standard_normal((4, 6, 3)) * [5.0, 2.0, 0.5]
    rotation, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    base = project_states(pooled, 3)
    rotated = project_states(pooled @ rotation.T, 3)
    np.testing.assert_allclose(base.distances, rotated.distances, atol=1e-9)
    assert base.projections.shape == (4, 6, 2)
    assert len(base.projection_rows()) == 24


def test_distance_is_zero_when_n_equals_t(rng: np.random.Generator) -> None:
    result = project_states(rng.standard_normal((3, 4, 2)), 4)
    np.testing.assert_array_equal(result.distances, np.zeros(3))


def test_n_beyond_horizon_is_rejected(rng: np.random.Generator) -> None:
    with pytest.raises(EquilibConfigError):
        project_states(rng.standard_normal((2, 3, 2)), 4)
