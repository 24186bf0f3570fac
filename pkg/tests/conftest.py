from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch: pytest.MonkeyPatch) -> None:
    for key in list(os.environ):
        if key.startswith("EQUILIB_"):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("EQUILIB_THREADS", "1")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_pathfinder():
    from equilib.pathfinder import PathfinderConfig

    return PathfinderConfig(
        image_size=24,
        target_dashes=4,
        n_distractor_contours=1,
        distractor_dashes=3,
        dash_length_px=2,
        gap_length_px=1,
        curvature_jitter=0.3,
        marker_radius_px=1,
        min_separation_px=2,
        seed=0,
    )
