"""Mini-batch training of a recurrent segmentation model."""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from equilib.cells.base import zero_state
from equilib.cells.model import RecurrentModel
from equilib.equilibrium import LossSpec, compute_gradients, lcp_penalty
from equilib.errors import EmptyDatasetError, EquilibNumericalError, NonFiniteError
from equilib.logging import get_logger
from equilib.repositories import CheckpointManifest, CheckpointRepository, MetricsRepository
from equilib.tensor import Tape, as_tensor

from .adam import AdamState, adam_step
from .evaluation import Sample, evaluate, image_batch
from .types import MetricsRecord, TrainConfig, TrainResult

METRICS_FILE = "metrics.csv"


def checkpoint_manifest(model: RecurrentModel, config: TrainConfig, epoch: int) -> CheckpointManifest:
    settings = model.config
    return CheckpointManifest(
        cell=settings.cell,
        channels=settings.channels,
        kernel_size=settings.kernel_size,
        input_kernel_size=settings.input_kernel_size,
        bn_eps=settings.bn_eps,
        steps=config.steps,
        lam=config.lam,
        algorithm=config.algorithm.kind,
        epoch=epoch,
        depth=settings.depth,
        batch_size=config.batch_size,
        parameters=list(model.parameters()),
    )


class Trainer:
    """Adam over shuffled batches; one checkpoint and metric rows per epoch."""

    def __init__(
        self,
        config: TrainConfig,
        *,
        checkpoints: CheckpointRepository | None = None,
        metrics: MetricsRepository | None = None,
        logger: logging.Logger | None = None,
        threads: int | None = None,
    ) -> None:
        self._config = config
        self._checkpoints = checkpoints
        self._metrics = metrics
        self._logger = logger or get_logger("equilib.train")
        self._threads = threads

    @property
    def config(self) -> TrainConfig:
        return self._config

    def initial_model(self) -> RecurrentModel:
        return RecurrentModel.initialize(self._config.model, np.random.default_rng(self._config.seed))

    def train(
        self,
        train_samples: Sequence[Sample],
        test_samples: Sequence[Sample] | None = None,
        *,
        model: RecurrentModel | None = None,
    ) -> TrainResult:
        if not train_samples:
            raise EmptyDatasetError(
                "Training dataset has no samples", hint="Generate one with `equilib generate`."
            )
        config = self._config
        model = model or self.initial_model()
        result = TrainResult(model=model)
        result.checkpoint = self._save(model, 0)
        state = AdamState()

        for epoch in range(1, config.epochs + 1):
            started = time.perf_counter()
            losses, penalties, peak = self._run_epoch(model, train_samples, state, epoch, result)
            elapsed = time.perf_counter() - started
            self._logger.info(
                "Epoch %d: loss %.4f, lcp %.4f, peak saved %d bytes",
                epoch,
                float(np.mean(losses)),
                float(np.mean(penalties)),
                peak,
            )

            train_eval = evaluate(
                model,
                train_samples,
                config.steps,
                batch_size=config.batch_size,
                threads=self._threads,
            )
            self._record(
                result,
                MetricsRecord(
                    epoch=epoch,
                    split="train",
                    mean_iou=train_eval.mean_iou[0],
                    mean_loss=float(np.mean(losses)),
                    mean_lcp=float(np.mean(penalties)),
                    wall_clock_seconds=elapsed,
                    peak_saved_bytes=peak,
                ),
            )
            if test_samples:
                test_eval = evaluate(
                    model,
                    test_samples,
                    config.steps,
                    batch_size=config.batch_size,
                    threads=self._threads,
                )
                self._record(
                    result,
                    MetricsRecord(
                        epoch=epoch,
                        split="test",
                        mean_iou=test_eval.mean_iou[0],
                        mean_loss=test_eval.mean_loss[0],
                        mean_lcp=None,
                        wall_clock_seconds=time.perf_counter() - started,
                        peak_saved_bytes=peak,
                    ),
                )
            result.checkpoint = self._save(model, epoch)
        return result

    def _run_epoch(
        self,
        model: RecurrentModel,
        samples: Sequence[Sample],
        state: AdamState,
        epoch: int,
        result: TrainResult,
    ) -> tuple[list[float], list[float], int]:
        config = self._config
        order = np.random.default_rng([config.seed, epoch]).permutation(len(samples))
        losses: list[float] = []
        penalties: list[float] = []
        peak = 0
        for start in range(0, len(order), config.batch_size):
            batch = [samples[int(i)] for i in order[start : start + config.batch_size]]
            try:
                loss, penalty, batch_peak = self._train_batch(model, batch, state)
            except EquilibNumericalError as exc:
                last = f" Last good checkpoint: {result.checkpoint}." if result.checkpoint else ""
                raise NonFiniteError(
                    f"Training diverged in epoch {epoch}: {exc}.{last}",
                    hint="Lower training.lr or switch to a contractive algorithm (crbp).",
                ) from exc
            losses.append(loss)
            penalties.append(penalty)
            result.lcp_trace.append(penalty)
            peak = max(peak, batch_peak)
        return losses, penalties, peak

    def _train_batch(
        self, model: RecurrentModel, batch: Sequence[Sample], state: AdamState
    ) -> tuple[float, float, int]:
        config = self._config
        images = as_tensor(image_batch([image for image, _ in batch]), name="image")
        masks = image_batch([mask for _, mask in batch])
        params = model.parameters()
        with Tape(retain=False) as tape:
            x = model.drive(images)
            loss = LossSpec.pixel_cross_entropy(
                model.readout, masks, per_step=config.algorithm.per_step_loss
            )
            grads = compute_gradients(
                model.cell,
                x,
                zero_state(model.cell, x),
                loss,
                params,
                config.algorithm,
                logger=self._logger,
            )
        if not np.isfinite(grads.loss):
            raise NonFiniteError(f"Loss became {grads.loss}")
        penalty = grads.penalty
        if penalty is None:
            # Telemetry only: the contraction penalty of an unpenalized cell.
            penalty = lcp_penalty(model.cell, x.detach(), grads.forward.state, config.lam).item()
        adam_step(
            params,
            grads.grads,
            state,
            config.lr,
            config.beta1,
            config.beta2,
            config.adam_eps,
        )
        return grads.loss, penalty, tape.peak_bytes

    def _record(self, result: TrainResult, record: MetricsRecord) -> None:
        result.records.append(record)
        if self._metrics is not None:
            self._metrics.append(METRICS_FILE, record.as_record())

    def _save(self, model: RecurrentModel, epoch: int) -> Path | None:
        if self._checkpoints is None:
            return None
        path = self._checkpoints.save(
            epoch, checkpoint_manifest(model, self._config, epoch), model.arrays()
        )
        self._logger.debug("Checkpoint written: %s", path)
        return path
