"""Run configuration: schema, strict TOML loading and canonical rendering."""

from __future__ import annotations

import hashlib
import os
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from equilib.errors import EquilibConfigError, EquilibUnknownKeyError

try:  # Python >=3.11
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # pragma: no cover - fallback for <3.11
    tomllib = None  # type: ignore[assignment]

_ENV_PREFIX = "EQUILIB_"
THREADS_ENV = "EQUILIB_THREADS"


@dataclass(frozen=True, slots=True)
class SettingSpec:
    default: Any
    kind: type
    help: str


_SCHEMA: dict[str, dict[str, SettingSpec]] = {
    "model": {
        "cell": SettingSpec("hgru", str, "Cell: hgru, convlstm or ffhgru (feedforward stack)"),
        "channels": SettingSpec(8, int, "Hidden channels C"),
        "kernel_size": SettingSpec(5, int, "Horizontal kernel size E (odd)"),
        "input_kernel_size": SettingSpec(5, int, "Input-stage kernel size (odd)"),
        "bn_eps": SettingSpec(1e-5, float, "Batch-norm epsilon"),
        "depth": SettingSpec(6, int, "Layers of the ffhgru stack, one weight set each"),
    },
    "algorithm": {
        "kind": SettingSpec("crbp", str, "bptt, tbptt, rbp, crbp or cbptt"),
        "steps": SettingSpec(20, int, "Recurrent steps N"),
        "window": SettingSpec(3, int, "TBPTT truncation window K"),
        "neumann_terms": SettingSpec(15, int, "Neumann series terms for RBP"),
        "neumann_tol": SettingSpec(1e-6, float, "Neumann early-stop tolerance"),
        "solver_tol": SettingSpec(1e-6, float, "Fixed-point residual tolerance"),
        "lam": SettingSpec(0.9, float, "Contraction target lambda in [0, 1)"),
        "penalty_weight": SettingSpec(1.0, float, "Weight of the Lipschitz penalty"),
        "per_step_loss": SettingSpec(False, bool, "Average the loss over every step (bptt/cbptt)"),
    },
    "training": {
        "lr": SettingSpec(3e-4, float, "Adam learning rate"),
        "batch_size": SettingSpec(8, int, "Images per batch"),
        "epochs": SettingSpec(20, int, "Passes over the training set"),
        "seed": SettingSpec(0, int, "Seed for initialization and shuffling"),
        "analysis_horizon": SettingSpec(40, int, "Analysis horizon T (>= steps)"),
        "beta1": SettingSpec(0.9, float, "Adam beta1"),
        "beta2": SettingSpec(0.999, float, "Adam beta2"),
        "adam_eps": SettingSpec(1e-8, float, "Adam epsilon"),
    },
    "data": {
        "train": SettingSpec("", str, "Training dataset directory"),
        "test": SettingSpec("", str, "Held-out dataset directory (optional)"),
    },
    "pathfinder": {
        "image_size": SettingSpec(64, int, "Square image size in pixels"),
        "target_dashes": SettingSpec(14, int, "Dashes in the target contour"),
        "n_distractor_contours": SettingSpec(2, int, "Number of distractor contours"),
        "distractor_dashes": SettingSpec(14, int, "Dashes per distractor contour"),
        "dash_length_px": SettingSpec(4, int, "Dash length in pixels"),
        "gap_length_px": SettingSpec(2, int, "Gap between dashes in pixels"),
        "curvature_jitter": SettingSpec(0.4, float, "Max turn per dash in radians"),
        "marker_radius_px": SettingSpec(2, int, "Start-marker radius in pixels"),
        "min_separation_px": SettingSpec(2, int, "Min distance target to distractors"),
        "seed": SettingSpec(0, int, "First sample seed"),
    },
}


def sections() -> list[str]:
    return list(_SCHEMA)


def default_settings() -> dict[str, dict[str, Any]]:
    return {
        section: {key: spec.default for key, spec in keys.items()}
        for section, keys in _SCHEMA.items()
    }


def describe_keys() -> list[tuple[str, str, str]]:
    """(``section.key``, rendered default, help) for every accepted key."""

    return [
        (f"{section}.{key}", render_value(spec.default), spec.help)
        for section, keys in _SCHEMA.items()
        for key, spec in keys.items()
    ]


def _render_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def render_value(value: Any) -> str:
    return _render_value(value)


def render_config(settings: Mapping[str, Mapping[str, Any]]) -> str:
    """Canonical TOML text: schema section order, schema key order."""

    lines: list[str] = []
    for section, keys in _SCHEMA.items():
        values = settings.get(section, {})
        lines.append(f"[{section}]")
        for key, spec in keys.items():
            lines.append(f"{key} = {_render_value(values.get(key, spec.default))}")
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def config_hash(settings: Mapping[str, Mapping[str, Any]]) -> str:
    return hashlib.sha256(render_config(settings).encode("utf-8")).hexdigest()


def _coerce(section: str, key: str, value: Any) -> Any:
    spec = _SCHEMA[section][key]
    name = f"{section}.{key}"
    if spec.kind is bool:
        if isinstance(value, bool):
            return value
    elif spec.kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif spec.kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif spec.kind is str:
        if isinstance(value, str):
            return value
        if isinstance(value, Path):
            return str(value)
    raise EquilibConfigError(
        f"{name} must be {spec.kind.__name__}, got {type(value).__name__} ({value!r})",
        hint=f"{name}: {spec.help}.",
    )


def _coerce_env_value(section: str, key: str, raw: str) -> Any:
    kind = _SCHEMA[section][key].kind
    if kind is bool:
        return raw.strip().lower() in {"1", "true", "yes", "on"}
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise EquilibConfigError(
            f"Environment value for {section}.{key} is not a {kind.__name__}: {raw!r}",
            hint=f"Fix or unset {_ENV_PREFIX}{section.upper()}_{key.upper()}.",
        ) from exc
    return raw


def _validate(data: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    unknown: list[str] = []
    validated: dict[str, dict[str, Any]] = {}
    for section, values in data.items():
        if section not in _SCHEMA or not isinstance(values, Mapping):
            unknown.append(section)
            continue
        for key, value in values.items():
            if key not in _SCHEMA[section]:
                unknown.append(f"{section}.{key}")
                continue
            validated.setdefault(section, {})[key] = value
    if unknown:
        raise EquilibUnknownKeyError(sorted(unknown))
    return {
        section: {key: _coerce(section, key, value) for key, value in values.items()}
        for section, values in validated.items()
    }


def load_file_config(path: Path) -> dict[str, dict[str, Any]]:
    if tomllib is None:
        raise EquilibConfigError(
            "TOML parser is not available.",
            hint="Use Python 3.11+.",
        )
    if not path.is_file():
        raise EquilibConfigError(
            f"Config not found: {path}",
            hint="Pass an existing TOML file to --config.",
        )
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))  # type: ignore[union-attr]
    except (OSError, ValueError) as exc:
        raise EquilibConfigError(
            f"Failed to parse config file: {path}",
            hint="Fix the TOML syntax and retry.",
        ) from exc
    return _validate(data)


def _load_env_config() -> dict[str, dict[str, Any]]:
    config: dict[str, dict[str, Any]] = {}
    for section, keys in _SCHEMA.items():
        for key in keys:
            env_key = f"{_ENV_PREFIX}{section.upper()}_{key.upper()}"
            raw = os.environ.get(env_key)
            if raw is not None:
                config.setdefault(section, {})[key] = _coerce_env_value(section, key, raw)
    return config


def get_config_with_sources(
    config_path: Path | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> dict[str, dict[str, tuple[Any, str]]]:
    """Merge defaults < file < environment < CLI, remembering each value's origin."""

    merged: dict[str, dict[str, tuple[Any, str]]] = {
        section: {key: (value, "default") for key, value in values.items()}
        for section, values in default_settings().items()
    }
    layers: list[tuple[str, Mapping[str, Mapping[str, Any]]]] = []
    if config_path is not None:
        layers.append(("file", load_file_config(config_path)))
    layers.append(("env", _load_env_config()))
    if overrides:
        layers.append(("cli", _validate(overrides)))
    for source, layer in layers:
        for section, values in layer.items():
            for key, value in values.items():
                merged[section][key] = (value, source)
    return merged


def get_config(
    config_path: Path | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> dict[str, dict[str, Any]]:
    merged = get_config_with_sources(config_path, overrides)
    return {
        section: {key: value for key, (value, _source) in values.items()}
        for section, values in merged.items()
    }


def worker_threads() -> int:
    """Worker cap from ``EQUILIB_THREADS`` (default: CPU count)."""

    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return max(os.cpu_count() or 1, 1)
    try:
        threads = int(raw)
    except ValueError as exc:
        raise EquilibConfigError(
            f"{THREADS_ENV} must be a positive integer, got {raw!r}"
        ) from exc
    if threads < 1:
        raise EquilibConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return threads
