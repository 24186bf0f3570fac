"""State-space analysis: pooled hidden states, PCA and a two-sample KS test."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from scipy.special import kolmogorov

from equilib.cells.base import zero_state
from equilib.cells.model import RecurrentModel
from equilib.equilibrium import forward_unroll
from equilib.errors import EmptyDatasetError, EquilibConfigError
from equilib.logging import get_logger
from equilib.tensor import as_tensor, no_grad

from .evaluation import Sample, batches, image_batch
from .types import KsResult, PcaFit, StateSpaceResult

RANK_RTOL = 1e-10


def pooled_states(
    model: RecurrentModel, samples: Sequence[Sample], horizon: int, *, batch_size: int = 1
) -> np.ndarray:
    """Spatially averaged hidden state of every image at steps 1..horizon: (images, T, C).

    Images are unrolled in the same batches as in evaluation.
    """

    if not samples:
        raise EmptyDatasetError("State-space analysis needs at least one image")
    tracks = []
    with no_grad():
        for chunk in batches(samples, batch_size):
            images = image_batch([image for image, _ in chunk])
            x = model.drive(as_tensor(images, name="image"))
            h0 = zero_state(model.cell, x)
            unrolled = forward_unroll(model.cell, x, h0, horizon, retain=True)
            # (T, B, C) -> (B, T, C)
            means = np.stack(
                [model.cell.hidden(h).value.mean(axis=(1, 2)) for h in unrolled.trajectory]
            )
            tracks.extend(means.transpose(1, 0, 2))
    return np.asarray(tracks)


def fit_pca(
    vectors: np.ndarray, components: int = 2, *, logger: logging.Logger | None = None
) -> PcaFit:
    """Top principal axes from the eigendecomposition of the covariance."""

    data = np.asarray(vectors, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyDatasetError(f"PCA needs a non-empty (samples, features) array, got {data.shape}")
    mean = data.mean(axis=0)
    centred = data - mean
    covariance = centred.T @ centred / max(data.shape[0] - 1, 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    top = eigenvalues[0] if eigenvalues.size else 0.0
    rank = int(np.count_nonzero(eigenvalues > RANK_RTOL * top)) if top > 0 else 0
    kept = min(components, rank)
    if kept < components:
        (logger or get_logger("equilib.analysis")).warning(
            "Covariance has rank %d; keeping %d of %d components", rank, kept, components
        )
    return PcaFit(
        mean=mean,
        components=eigenvectors[:, :kept].T.copy(),
        variances=eigenvalues[:kept].copy(),
    )


def project_states(
    pooled: np.ndarray,
    n_steps: int,
    *,
    components: int = 2,
    logger: logging.Logger | None = None,
) -> StateSpaceResult:
    """Fit PCA on steps 1..N of every image, project all steps, compare N with T."""

    pooled = np.asarray(pooled, dtype=np.float64)
    images, horizon, channels = pooled.shape
    if not 1 <= n_steps <= horizon:
        raise EquilibConfigError(f"Need 1 <= N <= T, got N={n_steps}, T={horizon}")
    pca = fit_pca(pooled[:, :n_steps].reshape(-1, channels), components, logger=logger)
    projections = pca.transform(pooled.reshape(-1, channels)).reshape(images, horizon, pca.rank)
    distances = np.linalg.norm(projections[:, n_steps - 1] - projections[:, horizon - 1], axis=-1)
    return StateSpaceResult(
        n_steps=n_steps,
        horizon=horizon,
        pca=pca,
        projections=projections,
        distances=distances,
    )


def state_space_analysis(
    model: RecurrentModel,
    samples: Sequence[Sample],
    n_steps: int,
    horizon: int,
    *,
    batch_size: int = 1,
    logger: logging.Logger | None = None,
) -> StateSpaceResult:
    if not horizon >= n_steps >= 1:
        raise EquilibConfigError(
            f"Analysis needs T >= N >= 1, got N={n_steps}, T={horizon}",
            hint="Pass --T at least as large as --N.",
        )
    pooled = pooled_states(model, samples, horizon, batch_size=batch_size)
    return project_states(pooled, n_steps, logger=logger)


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KsResult:
    """Two-sided KS statistic with the asymptotic Kolmogorov p-value."""

    xs = np.sort(np.asarray(a, dtype=np.float64).ravel())
    ys = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if xs.size == 0 or ys.size == 0:
        raise EmptyDatasetError("ks_two_sample needs two non-empty samples")
    points = np.concatenate([xs, ys])
    cdf_a = np.searchsorted(xs, points, side="right") / xs.size
    cdf_b = np.searchsorted(ys, points, side="right") / ys.size
    statistic = float(np.max(np.abs(cdf_a - cdf_b)))
    en = np.sqrt(xs.size * ys.size / (xs.size + ys.size))
    p_value = float(np.clip(kolmogorov((en + 0.12 + 0.11 / en) * statistic), 0.0, 1.0))
    return KsResult(statistic=statistic, p_value=p_value)


def plot_state_space(result: StateSpaceResult, path: str | Path) -> Path:
    """Scatter of the projected trajectories; steps after N drawn in a second colour."""

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    projections = result.projections
    if projections.shape[-1] < 2:
        projections = np.concatenate(
            [projections, np.zeros(projections.shape[:-1] + (2 - projections.shape[-1],))], axis=-1
        )
    n = result.n_steps
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    try:
        early = projections[:, :n].reshape(-1, 2)
        late = projections[:, n:].reshape(-1, 2)
        ax.scatter(early[:, 0], early[:, 1], s=6, c="tab:blue", label=f"t <= {n}")
        if late.size:
            ax.scatter(late[:, 0], late[:, 1], s=6, c="tab:red", alpha=0.6, label=f"t > {n}")
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
    finally:
        plt.close(fig)
    return path
