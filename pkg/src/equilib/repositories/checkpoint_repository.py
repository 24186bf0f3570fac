from __future__ import annotations

import shutil
import tempfile
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from equilib.config import render_value
from equilib.errors import EquilibRepositoryError
from equilib.tensor.io import read_tensor, write_tensor

from .files import atomic_write_text
from .types import CheckpointManifest, CheckpointRepositoryConfig

try:  # Python >=3.11
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # pragma: no cover - fallback for <3.11
    tomllib = None  # type: ignore[assignment]

MANIFEST_NAME = "manifest.toml"
_PREFIX = "epoch-"


def render_manifest(manifest: CheckpointManifest) -> str:
    lines = [f"{key} = {render_value(value)}" for key, value in manifest.as_settings().items()]
    names = ", ".join(render_value(name) for name in manifest.parameters)
    lines.append(f"parameters = [{names}]")
    return "\n".join(lines) + "\n"


@dataclass(slots=True)
class CheckpointRepository:
    """One directory per checkpoint: a TOML manifest and ``<param>.bin`` tensors."""

    config: CheckpointRepositoryConfig

    @classmethod
    def at(cls, root: str | Path) -> CheckpointRepository:
        return cls(CheckpointRepositoryConfig(root_dir=Path(root)))

    @property
    def root(self) -> Path:
        return self.config.root_dir

    def path_for(self, epoch: int) -> Path:
        return self.root / f"{_PREFIX}{epoch:04d}"

    def save(
        self, epoch: int, manifest: CheckpointManifest, arrays: Mapping[str, np.ndarray]
    ) -> Path:
        target = self.path_for(epoch)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            staging = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=self.root))
        except OSError as exc:
            raise EquilibRepositoryError(f"Failed to create checkpoint dir under {self.root}") from exc
        try:
            for name in manifest.parameters:
                write_tensor(staging / f"{name}.bin", arrays[name])
            atomic_write_text(staging / MANIFEST_NAME, render_manifest(manifest))
            if target.exists():
                shutil.rmtree(target)
            staging.rename(target)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        return target

    def latest(self) -> Path | None:
        if not self.root.is_dir():
            return None
        candidates = sorted(p for p in self.root.iterdir() if p.is_dir() and p.name.startswith(_PREFIX))
        return candidates[-1] if candidates else None

    @staticmethod
    def load(path: str | Path) -> tuple[CheckpointManifest, dict[str, np.ndarray]]:
        directory = Path(path).expanduser()
        if directory.is_file() and directory.name == MANIFEST_NAME:
            directory = directory.parent
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.is_file():
            raise EquilibRepositoryError(
                f"Checkpoint manifest not found: {manifest_path}",
                hint="Point --ckpt at a checkpoint directory written by `equilib train`.",
            )
        if tomllib is None:  # pragma: no cover
            raise EquilibRepositoryError("TOML parser is not available.")
        try:
            data: dict[str, Any] = tomllib.loads(manifest_path.read_text(encoding="utf-8"))
            manifest = CheckpointManifest(
                cell=str(data["cell"]),
                channels=int(data["channels"]),
                kernel_size=int(data["kernel_size"]),
                input_kernel_size=int(data["input_kernel_size"]),
                bn_eps=float(data["bn_eps"]),
                steps=int(data["steps"]),
                lam=float(data["lam"]),
                algorithm=str(data["algorithm"]),
                epoch=int(data["epoch"]),
                depth=int(data["depth"]),
                batch_size=int(data["batch_size"]),
                parameters=[str(name) for name in data["parameters"]],
            )
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise EquilibRepositoryError(f"Corrupt checkpoint manifest: {manifest_path}") from exc
        arrays = {name: read_tensor(directory / f"{name}.bin") for name in manifest.parameters}
        return manifest, arrays
