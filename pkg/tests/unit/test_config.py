from __future__ import annotations

import tomllib
from pathlib import Path

import pytest

from equilib import config
from equilib.errors import EquilibConfigError, EquilibUnknownKeyError


def test_defaults_cover_every_section() -> None:
    settings = config.get_config()
    assert list(settings) == ["model", "algorithm", "training", "data", "pathfinder"]
    assert settings["algorithm"]["kind"] == "crbp"
    assert settings["algorithm"]["lam"] == 0.9
    assert settings["training"]["lr"] == 3e-4
    assert settings["pathfinder"]["image_size"] == 64


def test_file_then_env_then_cli_precedence(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    cfg = tmp_path / "run.toml"
    cfg.write_text("[algorithm]\nsteps = 6\nwindow = 2\n[training]\nlr = 1\n", encoding="utf-8")
    monkeypatch.setenv("EQUILIB_ALGORITHM_WINDOW", "4")
    merged = config.get_config_with_sources(cfg, {"algorithm": {"kind": "bptt"}})
    assert merged["algorithm"]["steps"] == (6, "file")
    assert merged["algorithm"]["window"] == (4, "env")
    assert merged["algorithm"]["kind"] == ("bptt", "cli")
    assert merged["model"]["cell"] == ("hgru", "default")
    # integers widen to float keys
    assert merged["training"]["lr"] == (1.0, "file")


def test_unknown_keys_are_listed(tmp_path: Path) -> None:
    cfg = tmp_path / "run.toml"
    cfg.write_text("[algorithm]\nstep = 6\n[optimizer]\nlr = 1.0\n", encoding="utf-8")
    with pytest.raises(EquilibUnknownKeyError) as excinfo:
        config.get_config(cfg)
    assert excinfo.value.keys == ["algorithm.step", "optimizer"]
    assert excinfo.value.exit_code == 2


def test_type_mismatch_names_the_key(tmp_path: Path) -> None:
    cfg = tmp_path / "run.toml"
    cfg.write_text('[model]\nchannels = "eight"\n', encoding="utf-8")
    with pytest.raises(EquilibConfigError, match="model.channels must be int"):
        config.get_config(cfg)


def test_missing_or_broken_file(tmp_path: Path) -> None:
    with pytest.raises(EquilibConfigError, match="Config not found"):
        config.get_config(tmp_path / "absent.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[model\n", encoding="utf-8")
    with pytest.raises(EquilibConfigError, match="Failed to parse"):
        config.get_config(broken)


def test_bad_environment_value(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("EQUILIB_ALGORITHM_STEPS", "many")
    with pytest.raises(EquilibConfigError, match="EQUILIB_ALGORITHM_STEPS"):
        config.get_config()


def test_rendered_config_parses_back_to_the_same_settings() -> None:
    settings = config.get_config(overrides={"data": {"train": 'runs/"a"'}})
    parsed = tomllib.loads(config.render_config(settings))
    assert parsed == settings


def test_config_hash_tracks_values() -> None:
    base = config.default_settings()
    assert config.config_hash(base) == config.config_hash(config.default_settings())
    changed = config.default_settings()
    changed["algorithm"]["steps"] = 21
    assert config.config_hash(changed) != config.config_hash(base)


def test_describe_keys_lists_every_key() -> None:
    keys = [key for key, _default, _help in config.describe_keys()]
    assert "algorithm.neumann_terms" in keys
    assert "pathfinder.min_separation_px" in keys
    assert len(keys) == sum(len(values) for values in config.default_settings().values())


def test_render_value_formats() -> None:
    assert config.render_value(True) == "true"
    assert config.render_value(0.1) == "0.1"
    assert config.render_value(3) == "3"
    assert config.render_value("a") == '"a"'


def test_worker_threads(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv(config.THREADS_ENV, "3")
    assert config.worker_threads() == 3
    monkeypatch.setenv(config.THREADS_ENV, "0")
    with pytest.raises(EquilibConfigError):
        config.worker_threads()
    monkeypatch.delenv(config.THREADS_ENV)
    assert config.worker_threads() >= 1
