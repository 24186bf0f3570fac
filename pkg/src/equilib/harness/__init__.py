"""Training, evaluation, state-space analysis and memory accounting."""

from .adam import AdamState, adam_step
from .analysis import (
    fit_pca,
    ks_two_sample,
    plot_state_space,
    pooled_states,
    project_states,
    state_space_analysis,
)
from .evaluation import batches, evaluate, parse_steps, pixel_cross_entropy
from .memory import memory_report
from .trainer import METRICS_FILE, Trainer, checkpoint_manifest
from .types import (
    EvalResult,
    KsResult,
    MemoryRow,
    MetricsRecord,
    PcaFit,
    StateSpaceResult,
    TrainConfig,
    TrainResult,
)

__all__ = [
    "METRICS_FILE",
    "AdamState",
    "EvalResult",
    "KsResult",
    "MemoryRow",
    "MetricsRecord",
    "PcaFit",
    "StateSpaceResult",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "adam_step",
    "batches",
    "checkpoint_manifest",
    "evaluate",
    "fit_pca",
    "ks_two_sample",
    "memory_report",
    "parse_steps",
    "pixel_cross_entropy",
    "plot_state_space",
    "pooled_states",
    "project_states",
    "state_space_analysis",
]
