"""Pathfinder sample generation: one marked target contour amid distractors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.ndimage import binary_dilation, distance_transform_edt

from equilib.errors import PlacementError

from .config import PathfinderConfig
from .render import Contour, Pixel, disk, walk_contour

MAX_RETRIES = 100
_TOUCH = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, slots=True)
class SampleMeta:
    seed: int
    dash_count: int
    distractor_count: int
    marker: Pixel
    target_polyline: list[Pixel] = field(default_factory=list)
    dash_pixel_counts: list[int] = field(default_factory=list)

    @property
    def target_ink_pixels(self) -> int:
        return sum(self.dash_pixel_counts)

    def as_record(self) -> dict[str, Any]:
        record = asdict(self)
        record["marker"] = list(self.marker)
        record["target_polyline"] = [list(p) for p in self.target_polyline]
        return record


@dataclass(frozen=True, slots=True)
class PathfinderSample:
    image: np.ndarray
    mask: np.ndarray
    meta: SampleMeta

    def image_tensor(self) -> np.ndarray:
        """Image as a (1, H, W, 1) batch."""

        return self.image[np.newaxis, :, :, np.newaxis]

    def mask_tensor(self) -> np.ndarray:
        return self.mask.astype(np.float64)[np.newaxis, :, :, np.newaxis]


def _start(
    rng: np.random.Generator, config: PathfinderConfig, forbidden: np.ndarray
) -> Pixel | None:
    """A uniformly drawn free pixel at least a marker radius from the border."""

    margin = config.marker_radius_px
    inner = forbidden[margin : config.image_size - margin, margin : config.image_size - margin]
    free = np.flatnonzero(~inner)
    if free.size == 0:
        return None
    row, col = np.unravel_index(int(free[rng.integers(free.size)]), inner.shape)
    return int(row) + margin, int(col) + margin


def _place(
    rng: np.random.Generator,
    config: PathfinderConfig,
    dashes: int,
    forbidden: np.ndarray,
    label: str,
    marker_zone: bool,
) -> tuple[Contour, Pixel]:
    size = config.image_size
    for _ in range(MAX_RETRIES):
        start = _start(rng, config, forbidden)
        if start is None:
            break
        exempt = None
        if marker_zone:
            exempt = np.zeros((size, size), dtype=bool)
            for r, c in disk(start, config.marker_radius_px, size):
                exempt[r, c] = True
            exempt = binary_dilation(exempt, structure=_TOUCH)
        contour = walk_contour(
            rng,
            size=size,
            dashes=dashes,
            dash_length=config.dash_length_px,
            gap_length=config.gap_length_px,
            max_turn=config.max_turn,
            forbidden=forbidden,
            start=start,
            exempt_first=exempt,
        )
        if contour is not None:
            return contour, start
    raise PlacementError(
        f"Could not place the {label} contour after {MAX_RETRIES} attempts",
        hint="Lower the density: fewer distractors, fewer dashes or a larger image.",
    )


def check_separation(target: np.ndarray, distractors: np.ndarray, min_separation: int) -> float:
    """Smallest distance from distractor ink to target ink.

    Raises ``PlacementError`` when it is below ``min_separation``.
    """

    if not distractors.any():
        return float("inf")
    closest = float(distance_transform_edt(~target)[distractors].min())
    if closest < min_separation:
        raise PlacementError(
            f"Distractor ink lies {closest:.2f}px from the target, "
            f"closer than min_separation_px={min_separation}"
        )
    return closest


def generate_sample(config: PathfinderConfig, seed: int | None = None) -> PathfinderSample:
    """Render one sample; a pure function of ``(config, seed)``."""

    config.check_feasible()
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    size = config.image_size

    target, marker_center = _place(
        rng, config, config.target_dashes, np.zeros((size, size), dtype=bool), "target", True
    )
    target_ink = np.zeros((size, size), dtype=bool)
    target.paint(target_ink)
    marker = np.zeros((size, size), dtype=bool)
    for r, c in disk(marker_center, config.marker_radius_px, size):
        marker[r, c] = True

    # Distance of every pixel to the nearest target pixel (marker included).
    clearance = distance_transform_edt(~(target_ink | marker))
    too_close = clearance < config.min_separation_px
    distractor_ink = np.zeros((size, size), dtype=bool)
    for index in range(config.n_distractor_contours):
        forbidden = too_close | binary_dilation(distractor_ink, structure=_TOUCH)
        contour, _ = _place(
            rng, config, config.distractor_dashes, forbidden, f"distractor #{index + 1}", False
        )
        contour.paint(distractor_ink)
    check_separation(target_ink | marker, distractor_ink, config.min_separation_px)

    ink = target_ink | marker | distractor_ink
    mask = target_ink & ~marker
    meta = SampleMeta(
        seed=int(seed),
        dash_count=config.target_dashes,
        distractor_count=config.n_distractor_contours,
        marker=marker_center,
        target_polyline=list(target.vertices),
        dash_pixel_counts=[len(dash) for dash in target.dashes],
    )
    return PathfinderSample(image=ink.astype(np.float64), mask=mask, meta=meta)
