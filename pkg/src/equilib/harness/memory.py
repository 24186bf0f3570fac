"""Saved-activation accounting for one forward+backward per algorithm and N."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from equilib.cells.base import zero_state
from equilib.cells.model import RecurrentModel
from equilib.equilibrium import ALGORITHM_KINDS, GradAlgorithm, LossSpec, compute_gradients
from equilib.errors import EquilibConfigError
from equilib.logging import get_logger
from equilib.tensor import Tape, as_tensor

from .evaluation import image_batch
from .types import MemoryRow


def measure(
    model: RecurrentModel,
    image: np.ndarray,
    mask: np.ndarray,
    algorithm: GradAlgorithm,
    *,
    logger: logging.Logger | None = None,
) -> MemoryRow:
    images = as_tensor(image_batch([image]), name="image")
    with Tape(retain=False) as tape:
        x = model.drive(images)
        loss = LossSpec.pixel_cross_entropy(model.readout, image_batch([mask]))
        compute_gradients(
            model.cell, x, zero_state(model.cell, x), loss, model.parameters(), algorithm, logger=logger
        )
    return MemoryRow(
        algorithm=algorithm.kind,
        steps=algorithm.steps,
        saved_count=tape.saved_count,
        peak_bytes=tape.peak_bytes,
    )


def memory_report(
    model: RecurrentModel,
    image: np.ndarray,
    mask: np.ndarray,
    algorithms: Sequence[str],
    steps_list: Sequence[int],
    *,
    template: GradAlgorithm | None = None,
    logger: logging.Logger | None = None,
) -> list[MemoryRow]:
    """One row per (algorithm, N) in the order given."""

    logger = logger or get_logger("equilib.memreport")
    template = template or GradAlgorithm()
    unknown = [kind for kind in algorithms if kind not in ALGORITHM_KINDS]
    if unknown:
        raise EquilibConfigError(
            f"Unknown algorithms: {', '.join(unknown)}",
            hint=f"Choose from {', '.join(ALGORITHM_KINDS)}.",
        )
    rows: list[MemoryRow] = []
    for kind in algorithms:
        for steps in steps_list:
            algorithm = replace(
                template,
                kind=kind,
                steps=int(steps),
                window=min(template.window, int(steps)),
                per_step_loss=False,
            )
            row = measure(model, image, mask, algorithm, logger=logger)
            logger.info("%s N=%d: %d bytes saved", kind, steps, row.peak_bytes)
            rows.append(row)
    return rows
