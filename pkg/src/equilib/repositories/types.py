"""Repository config and record types."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from equilib.errors import EquilibMissingSettingError


# --- Config. ---
@dataclass(frozen=True, slots=True)
class DatasetRepositoryConfig:
    root_dir: Path

    def __post_init__(self) -> None:  # type: ignore[override]
        object.__setattr__(self, "root_dir", Path(self.root_dir).expanduser())

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any], key: str = "train") -> DatasetRepositoryConfig:
        root = settings.get(key)
        if not root:
            raise EquilibMissingSettingError(f"data.{key}")
        return cls(root_dir=Path(root))


@dataclass(frozen=True, slots=True)
class CheckpointRepositoryConfig:
    root_dir: Path

    def __post_init__(self) -> None:  # type: ignore[override]
        object.__setattr__(self, "root_dir", Path(self.root_dir).expanduser())


# --- Records. ---
@dataclass(frozen=True, slots=True)
class DatasetEntry:
    index: int
    seed: int
    image: str
    mask: str
    image_sha256: str
    mask_sha256: str
    meta: dict[str, Any] = field(default_factory=dict)

    def as_record(self) -> dict[str, Any]:
        return {
            "kind": "sample",
            "index": self.index,
            "seed": self.seed,
            "image": self.image,
            "mask": self.mask,
            "image_sha256": self.image_sha256,
            "mask_sha256": self.mask_sha256,
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> DatasetEntry:
        return cls(
            index=int(record["index"]),
            seed=int(record["seed"]),
            image=str(record["image"]),
            mask=str(record["mask"]),
            image_sha256=str(record["image_sha256"]),
            mask_sha256=str(record["mask_sha256"]),
            meta=dict(record.get("meta", {})),
        )


@dataclass(frozen=True, slots=True)
class DatasetManifest:
    config: dict[str, Any]
    config_hash: str
    seed_start: int
    entries: list[DatasetEntry] = field(default_factory=list)

    def header(self) -> dict[str, Any]:
        return {
            "kind": "header",
            "config": self.config,
            "config_hash": self.config_hash,
            "seed_start": self.seed_start,
            "n_samples": len(self.entries),
        }


@dataclass(frozen=True, slots=True)
class CheckpointManifest:
    cell: str
    channels: int
    kernel_size: int
    input_kernel_size: int
    bn_eps: float
    steps: int
    lam: float
    algorithm: str
    epoch: int
    depth: int = 6
    batch_size: int = 1
    parameters: list[str] = field(default_factory=list)

    def as_settings(self) -> dict[str, Any]:
        return {
            "cell": self.cell,
            "channels": self.channels,
            "kernel_size": self.kernel_size,
            "input_kernel_size": self.input_kernel_size,
            "bn_eps": self.bn_eps,
            "steps": self.steps,
            "lam": self.lam,
            "algorithm": self.algorithm,
            "epoch": self.epoch,
            "depth": self.depth,
            "batch_size": self.batch_size,
        }


@dataclass(slots=True)
class RunManifest:
    subcommand: str
    config: dict[str, Any]
    config_hash: str
    version: str
    outputs: dict[str, str]
    started_at: str
    finished_at: str | None = None

    def as_record(self) -> dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "config_hash": self.config_hash,
            "version": self.version,
            "outputs": self.outputs,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }
