from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from equilib.config import render_value
from equilib.errors import EquilibRepositoryError

from .files import atomic_write_text

METRICS_COLUMNS = (
    "epoch",
    "split",
    "mean_iou",
    "mean_loss",
    "mean_lcp",
    "wall_clock_seconds",
    "peak_saved_bytes",
)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return render_value(value)
    return str(value)


@dataclass(slots=True)
class MetricsRepository:
    """CSV tables under a run's output root."""

    root_dir: Path

    def __post_init__(self) -> None:
        self.root_dir = Path(self.root_dir).expanduser()

    def append(self, name: str, row: Mapping[str, Any], columns: Sequence[str] = METRICS_COLUMNS) -> Path:
        """Append one row, writing the header when the file is new."""

        path = self.root_dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            is_new = not path.exists() or path.stat().st_size == 0
            with path.open("a", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                if is_new:
                    writer.writerow(columns)
                writer.writerow([_cell(row.get(column)) for column in columns])
        except OSError as exc:
            raise EquilibRepositoryError(f"Failed to append to {path}") from exc
        return path

    def write_table(
        self, name: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]
    ) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(column)) for column in columns])
        return atomic_write_text(self.root_dir / name, buffer.getvalue())

    def read_table(self, name: str) -> list[dict[str, str]]:
        path = self.root_dir / name
        try:
            with path.open(encoding="utf-8", newline="") as handle:
                return list(csv.DictReader(handle))
        except FileNotFoundError as exc:
            raise EquilibRepositoryError(f"Table not found: {path}") from exc
