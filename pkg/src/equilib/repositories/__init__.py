"""Public interface for equilib repositories."""

from .checkpoint_repository import CheckpointRepository
from .dataset_repository import DatasetRepository, decode_png, encode_png
from .metrics_repository import METRICS_COLUMNS, MetricsRepository
from .run_manifest_repository import RunManifestRepository, utc_now
from .types import (
    CheckpointManifest,
    CheckpointRepositoryConfig,
    DatasetEntry,
    DatasetManifest,
    DatasetRepositoryConfig,
    RunManifest,
)

__all__ = [
    "CheckpointManifest",
    "CheckpointRepository",
    "CheckpointRepositoryConfig",
    "DatasetEntry",
    "DatasetManifest",
    "DatasetRepository",
    "DatasetRepositoryConfig",
    "METRICS_COLUMNS",
    "MetricsRepository",
    "RunManifest",
    "RunManifestRepository",
    "decode_png",
    "encode_png",
    "utc_now",
]
