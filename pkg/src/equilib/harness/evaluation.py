"""Per-step IoU of a trained model on a dataset."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import expit

from equilib.cells.base import zero_state
from equilib.cells.model import RecurrentModel
from equilib.config import worker_threads
from equilib.equilibrium import forward_unroll
from equilib.errors import EmptyDatasetError, EquilibConfigError, ShapeMismatchError
from equilib.pathfinder import iou_from_logits
from equilib.tensor import as_tensor, no_grad

from .types import EvalResult

Sample = tuple[np.ndarray, np.ndarray]


def pixel_cross_entropy(logits: np.ndarray, mask: np.ndarray) -> float:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(mask, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, z) - z * y))


def image_batch(images: Sequence[np.ndarray]) -> np.ndarray:
    """Stack (H, W) images into a (B, H, W, 1) batch."""

    return np.stack([np.asarray(image, dtype=np.float64) for image in images])[..., np.newaxis]


def batches(samples: Sequence[Sample], batch_size: int) -> list[list[Sample]]:
    """Consecutive runs of at most ``batch_size`` samples with one image shape."""

    if batch_size < 1:
        raise EquilibConfigError(f"batch_size must be >= 1, got {batch_size}")
    chunks: list[list[Sample]] = []
    for sample in samples:
        current = chunks[-1] if chunks else None
        if (
            current is not None
            and len(current) < batch_size
            and np.shape(current[0][0]) == np.shape(sample[0])
        ):
            current.append(sample)
        else:
            chunks.append([sample])
    return chunks


def step_logits(
    model: RecurrentModel, images: Sequence[np.ndarray], steps: Sequence[int]
) -> dict[int, np.ndarray]:
    """Readout logits (B, H, W) of one batch after each requested step, without recording."""

    wanted = sorted(set(steps))
    with no_grad():
        x = model.drive(as_tensor(image_batch(images), name="image"))
        unrolled = forward_unroll(model.cell, x, zero_state(model.cell, x), wanted[-1], retain=True)
        return {t: model.readout(unrolled.trajectory[t - 1]).value[..., 0] for t in wanted}


def parse_steps(selection: str | int | Sequence[int]) -> list[int]:
    """``"A..B"``, ``"t"``, ``"a,b,c"``, an int or a sequence of ints."""

    if isinstance(selection, int):
        steps = [selection]
    elif isinstance(selection, str):
        text = selection.strip()
        try:
            if ".." in text:
                low, high = (int(part) for part in text.split("..", 1))
                steps = list(range(low, high + 1))
            else:
                steps = [int(part) for part in text.split(",") if part.strip()]
        except ValueError as exc:
            raise EquilibConfigError(
                f"Invalid step selection: {selection!r}", hint="Use t, a,b,c or A..B."
            ) from exc
    else:
        steps = [int(t) for t in selection]
    if not steps or min(steps) < 1:
        raise EquilibConfigError(
            f"Steps must be a non-empty selection of integers >= 1, got {selection!r}"
        )
    return sorted(set(steps))


def evaluate(
    model: RecurrentModel,
    samples: Sequence[Sample],
    steps: str | int | Sequence[int],
    *,
    batch_size: int = 1,
    threads: int | None = None,
    return_maps: bool = False,
) -> EvalResult:
    """Mean IoU over ``samples`` after every requested step.

    Samples run in batches of ``batch_size``, so batch norm sees the same
    kind of batch as in training; batches run in parallel. With
    ``return_maps`` the per-step probability maps of the first image are
    kept too.
    """

    if not samples:
        raise EmptyDatasetError(
            "Cannot evaluate on an empty dataset", hint="Point --data at a generated dataset."
        )
    wanted = parse_steps(steps)
    for image, mask in samples:
        if np.shape(image) != np.shape(mask):
            raise ShapeMismatchError(
                f"Image shape {np.shape(image)} does not match mask shape {np.shape(mask)}"
            )

    def _batch(chunk: list[Sample]) -> tuple[list[list[float]], list[list[float]], dict]:
        logits = step_logits(model, [image for image, _ in chunk], wanted)
        ious, losses = [], []
        for k, (_, mask) in enumerate(chunk):
            ious.append([iou_from_logits(logits[t][k], mask) for t in wanted])
            losses.append([pixel_cross_entropy(logits[t][k], mask) for t in wanted])
        return ious, losses, {t: logits[t][0] for t in wanted}

    chunks = batches(samples, batch_size)
    workers = max(1, threads if threads is not None else worker_threads())
    if workers == 1:
        outcomes = [_batch(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_batch, chunks))

    per_image = np.array([row for ious, _, _ in outcomes for row in ious])
    losses = np.array([row for _, loss, _ in outcomes for row in loss])
    maps = None
    if return_maps:
        maps = {t: expit(logits) for t, logits in outcomes[0][2].items()}
    return EvalResult(
        steps=wanted,
        mean_iou=[float(v) for v in per_image.mean(axis=0)],
        mean_loss=[float(v) for v in losses.mean(axis=0)],
        per_image=per_image,
        maps=maps,
    )
