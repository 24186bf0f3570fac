from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

from equilib.errors import EquilibRepositoryError


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """Write through a sibling temp file and rename over ``path``."""

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as exc:
        raise EquilibRepositoryError(f"Failed to write {path}: {exc.strerror or exc}") from exc
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError as exc:
        raise EquilibRepositoryError(f"File not found: {path}") from exc
    except OSError as exc:  # pragma: no cover - filesystem dependent
        raise EquilibRepositoryError(f"Failed to read {path}") from exc
