from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from equilib.errors import EquilibOutputExistsError, EquilibRepositoryError

from .files import atomic_write_text, read_bytes
from .types import RunManifest

MANIFEST_NAME = "run_manifest.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(slots=True)
class RunManifestRepository:
    """Guards an output root and records what produced it."""

    root_dir: Path
    overwrite: bool = False

    def __post_init__(self) -> None:
        self.root_dir = Path(self.root_dir).expanduser()

    @property
    def path(self) -> Path:
        return self.root_dir / MANIFEST_NAME

    def read(self) -> dict[str, Any] | None:
        if not self.path.is_file():
            return None
        try:
            return json.loads(read_bytes(self.path).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EquilibRepositoryError(f"Corrupt run manifest: {self.path}") from exc

    def begin(self, manifest: RunManifest) -> RunManifest:
        """Claim the output root; refuses a used root unless overwrite is set."""

        if self.path.exists() and not self.overwrite:
            raise EquilibOutputExistsError(
                f"Output directory already holds a run: {self.root_dir}",
                hint="Pass --overwrite to replace it, or choose another --out.",
            )
        self.write(manifest)
        return manifest

    def finish(self, manifest: RunManifest, outputs: dict[str, str] | None = None) -> RunManifest:
        if outputs:
            manifest.outputs.update(outputs)
        manifest.finished_at = utc_now()
        self.write(manifest)
        return manifest

    def write(self, manifest: RunManifest) -> Path:
        text = json.dumps(manifest.as_record(), indent=2, sort_keys=True)
        return atomic_write_text(self.path, text + "\n")
