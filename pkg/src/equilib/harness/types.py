from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from equilib.cells.model import ModelConfig, RecurrentModel
from equilib.equilibrium import GradAlgorithm
from equilib.errors import EquilibConfigError


@dataclass(frozen=True, slots=True)
class TrainConfig:
    algorithm: GradAlgorithm = field(default_factory=GradAlgorithm)
    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = 3e-4
    batch_size: int = 8
    epochs: int = 20
    seed: int = 0
    analysis_horizon: int = 40
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    train_dir: Path | None = None
    test_dir: Path | None = None
    checkpoint_dir: Path | None = None

    def __post_init__(self) -> None:
        if not self.analysis_horizon >= self.steps >= 1:
            raise EquilibConfigError(
                f"training.analysis_horizon ({self.analysis_horizon}) must be >= "
                f"algorithm.steps ({self.steps}) >= 1"
            )
        if self.lr <= 0:
            raise EquilibConfigError(f"training.lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise EquilibConfigError(f"training.batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise EquilibConfigError(f"training.epochs must be >= 0, got {self.epochs}")
        for key in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, key) < 1.0:
                raise EquilibConfigError(f"training.{key} must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise EquilibConfigError(f"training.adam_eps must be > 0, got {self.adam_eps}")
        if self.model.cell == "ffhgru" and (self.algorithm.kind != "bptt" or self.steps != 1):
            raise EquilibConfigError(
                "The ffhgru stack is trained with ordinary backprop",
                hint="Set algorithm.kind = \"bptt\" and algorithm.steps = 1.",
            )

    @property
    def steps(self) -> int:
        return self.algorithm.steps

    @property
    def lam(self) -> float:
        return self.algorithm.lam

    @property
    def penalty_weight(self) -> float:
        return self.algorithm.penalty_weight

    @classmethod
    def from_settings(
        cls, settings: Mapping[str, Mapping[str, Any]], checkpoint_dir: Path | None = None
    ) -> TrainConfig:
        training = settings.get("training", {})
        data = settings.get("data", {})
        return cls(
            algorithm=GradAlgorithm.from_settings(settings.get("algorithm", {})),
            model=ModelConfig.from_settings(settings.get("model", {})),
            lr=float(training.get("lr", 3e-4)),
            batch_size=int(training.get("batch_size", 8)),
            epochs=int(training.get("epochs", 20)),
            seed=int(training.get("seed", 0)),
            analysis_horizon=int(training.get("analysis_horizon", 40)),
            beta1=float(training.get("beta1", 0.9)),
            beta2=float(training.get("beta2", 0.999)),
            adam_eps=float(training.get("adam_eps", 1e-8)),
            train_dir=Path(data["train"]) if data.get("train") else None,
            test_dir=Path(data["test"]) if data.get("test") else None,
            checkpoint_dir=checkpoint_dir,
        )


@dataclass(frozen=True, slots=True)
class MetricsRecord:
    epoch: int
    split: str
    mean_iou: float
    mean_loss: float
    mean_lcp: float | None
    wall_clock_seconds: float
    peak_saved_bytes: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean_iou <= 1.0:
            raise ValueError(f"mean_iou must lie in [0, 1], got {self.mean_iou}")

    def as_record(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "split": self.split,
            "mean_iou": self.mean_iou,
            "mean_loss": self.mean_loss,
            "mean_lcp": self.mean_lcp,
            "wall_clock_seconds": self.wall_clock_seconds,
            "peak_saved_bytes": self.peak_saved_bytes,
        }


@dataclass(slots=True)
class TrainResult:
    model: RecurrentModel
    records: list[MetricsRecord] = field(default_factory=list)
    checkpoint: Path | None = None
    lcp_trace: list[float] = field(default_factory=list)

    def best(self, split: str = "test") -> MetricsRecord | None:
        rows = [r for r in self.records if r.split == split]
        return max(rows, key=lambda r: r.mean_iou) if rows else None


@dataclass(frozen=True, slots=True)
class EvalResult:
    steps: list[int]
    mean_iou: list[float]
    mean_loss: list[float]
    per_image: np.ndarray
    maps: dict[int, np.ndarray] | None = None

    @property
    def best_step(self) -> int:
        return self.steps[int(np.argmax(self.mean_iou))]

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"step": t, "mean_iou": iou, "mean_loss": loss}
            for t, iou, loss in zip(self.steps, self.mean_iou, self.mean_loss, strict=True)
        ]


@dataclass(frozen=True, slots=True)
class PcaFit:
    mean: np.ndarray
    components: np.ndarray
    variances: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.components.shape[0])

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        return (np.asarray(vectors) - self.mean) @ self.components.T

    def inverse_transform(self, projections: np.ndarray) -> np.ndarray:
        return np.asarray(projections) @ self.components + self.mean


@dataclass(frozen=True, slots=True)
class StateSpaceResult:
    """``projections`` is (images, T, k); ``distances`` compares step N with step T."""

    n_steps: int
    horizon: int
    pca: PcaFit
    projections: np.ndarray
    distances: np.ndarray

    def projection_rows(self) -> list[dict[str, Any]]:
        rows: list[dict[str, Any]] = []
        for image_id, track in enumerate(self.projections):
            for t, point in enumerate(track, start=1):
                padded = list(point) + [0.0] * (2 - len(point))
                rows.append({"image_id": image_id, "step": t, "pc1": padded[0], "pc2": padded[1]})
        return rows

    def distance_rows(self) -> list[dict[str, Any]]:
        return [{"image_id": i, "distance": float(d)} for i, d in enumerate(self.distances)]


@dataclass(frozen=True, slots=True)
class KsResult:
    statistic: float
    p_value: float


@dataclass(frozen=True, slots=True)
class MemoryRow:
    algorithm: str
    steps: int
    saved_count: int
    peak_bytes: int

    def as_record(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "steps": self.steps,
            "saved_count": self.saved_count,
            "peak_bytes": self.peak_bytes,
        }
