from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from PIL import Image

from equilib.errors import EmptyDatasetError, EquilibRepositoryError

from .files import atomic_write_bytes, atomic_write_text, read_bytes, sha256_bytes
from .types import DatasetEntry, DatasetManifest, DatasetRepositoryConfig

if TYPE_CHECKING:
    from equilib.pathfinder.generator import PathfinderSample

MANIFEST_NAME = "manifest.jsonl"


def encode_png(array: np.ndarray) -> bytes:
    """8-bit grayscale for float images in [0, 1], 1-bit for boolean masks."""

    if array.dtype == np.bool_:
        image = Image.fromarray(array)
    else:
        image = Image.fromarray(np.rint(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8))
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def decode_png(data: bytes, source: str) -> Image.Image:
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except OSError as exc:
        raise EquilibRepositoryError(f"Unreadable PNG: {source}") from exc
    return image


@dataclass(slots=True)
class DatasetRepository:
    """Pathfinder samples as PNG pairs plus a JSON-lines manifest."""

    config: DatasetRepositoryConfig

    @classmethod
    def at(cls, root: str | Path) -> DatasetRepository:
        return cls(DatasetRepositoryConfig(root_dir=Path(root)))

    @property
    def root(self) -> Path:
        return self.config.root_dir

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def write_sample(self, index: int, sample: PathfinderSample) -> DatasetEntry:
        image_rel = f"images/{index:06d}.png"
        mask_rel = f"masks/{index:06d}.png"
        image_bytes = encode_png(sample.image)
        mask_bytes = encode_png(sample.mask.astype(bool))
        atomic_write_bytes(self.root / image_rel, image_bytes)
        atomic_write_bytes(self.root / mask_rel, mask_bytes)
        return DatasetEntry(
            index=index,
            seed=sample.meta.seed,
            image=image_rel,
            mask=mask_rel,
            image_sha256=sha256_bytes(image_bytes),
            mask_sha256=sha256_bytes(mask_bytes),
            meta=sample.meta.as_record(),
        )

    def write_manifest(self, manifest: DatasetManifest) -> Path:
        lines = [json.dumps(manifest.header(), sort_keys=True)]
        lines += [json.dumps(entry.as_record(), sort_keys=True) for entry in manifest.entries]
        return atomic_write_text(self.manifest_path, "\n".join(lines) + "\n")

    def read_manifest(self) -> DatasetManifest:
        if not self.manifest_path.is_file():
            raise EquilibRepositoryError(
                f"Dataset manifest not found: {self.manifest_path}",
                hint="Run `equilib generate` to create the dataset first.",
            )
        text = read_bytes(self.manifest_path).decode("utf-8")
        try:
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise EquilibRepositoryError(f"Corrupt dataset manifest: {self.manifest_path}") from exc
        if not records or records[0].get("kind") != "header":
            raise EquilibRepositoryError(f"Dataset manifest has no header: {self.manifest_path}")
        header = records[0]
        return DatasetManifest(
            config=dict(header.get("config", {})),
            config_hash=str(header.get("config_hash", "")),
            seed_start=int(header.get("seed_start", 0)),
            entries=[DatasetEntry.from_record(r) for r in records[1:]],
        )

    def load_entry(self, entry: DatasetEntry) -> tuple[np.ndarray, np.ndarray]:
        """(image in [0, 1], boolean mask), both (H, W)."""

        image = decode_png(read_bytes(self.root / entry.image), entry.image).convert("L")
        mask = decode_png(read_bytes(self.root / entry.mask), entry.mask).convert("1")
        return np.asarray(image, dtype=np.float64) / 255.0, np.asarray(mask, dtype=bool)

    def load_all(self, limit: int | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        entries = self.read_manifest().entries
        if limit is not None:
            entries = entries[:limit]
        if not entries:
            raise EmptyDatasetError(
                f"Dataset at {self.root} has no samples",
                hint="Generate at least one sample with `equilib generate --n 1`.",
            )
        return [self.load_entry(entry) for entry in entries]
