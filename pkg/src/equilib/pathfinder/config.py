from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from equilib.errors import EquilibConfigError, PathfinderInfeasibleError

HEADINGS = 64


@dataclass(frozen=True, slots=True)
class PathfinderConfig:
    """Geometry of one Pathfinder variant. Defaults are the desk profile."""

    image_size: int = 64
    target_dashes: int = 14
    n_distractor_contours: int = 2
    distractor_dashes: int = 14
    dash_length_px: int = 4
    gap_length_px: int = 2
    curvature_jitter: float = 0.4
    marker_radius_px: int = 2
    min_separation_px: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        checks = (
            ("image_size", self.image_size >= 8, ">= 8"),
            ("target_dashes", self.target_dashes >= 3, ">= 3"),
            ("n_distractor_contours", self.n_distractor_contours >= 0, ">= 0"),
            ("distractor_dashes", self.distractor_dashes >= 1, ">= 1"),
            ("dash_length_px", self.dash_length_px >= 1, ">= 1"),
            ("gap_length_px", self.gap_length_px >= 1, ">= 1"),
            ("curvature_jitter", 0.0 <= self.curvature_jitter < math.pi, "in [0, pi)"),
            ("marker_radius_px", self.marker_radius_px >= 0, ">= 0"),
            ("min_separation_px", self.min_separation_px >= 1, ">= 1"),
            ("seed", self.seed >= 0, ">= 0"),
        )
        for key, ok, rule in checks:
            if not ok:
                raise EquilibConfigError(
                    f"pathfinder.{key} must be {rule}, got {getattr(self, key)}"
                )

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> PathfinderConfig:
        return cls(
            image_size=int(settings.get("image_size", 64)),
            target_dashes=int(settings.get("target_dashes", 14)),
            n_distractor_contours=int(settings.get("n_distractor_contours", 2)),
            distractor_dashes=int(settings.get("distractor_dashes", 14)),
            dash_length_px=int(settings.get("dash_length_px", 4)),
            gap_length_px=int(settings.get("gap_length_px", 2)),
            curvature_jitter=float(settings.get("curvature_jitter", 0.4)),
            marker_radius_px=int(settings.get("marker_radius_px", 2)),
            min_separation_px=int(settings.get("min_separation_px", 2)),
            seed=int(settings.get("seed", 0)),
        )

    def as_settings(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.__slots__}

    @property
    def stride(self) -> int:
        return self.dash_length_px + self.gap_length_px

    @property
    def max_turn(self) -> int:
        """Largest per-dash turn in heading-table units."""

        return int(round(self.curvature_jitter / (2.0 * math.pi / HEADINGS)))

    def expected_extent(self, dashes: int) -> float:
        """Span of a contour: its length, capped by the tightest turning circle."""

        length = dashes * self.stride
        if self.max_turn == 0:
            return float(length)
        turn = self.max_turn * 2.0 * math.pi / HEADINGS
        return min(float(length), 2.0 * self.stride / turn + self.stride)

    def check_feasible(self) -> None:
        usable = self.image_size - 2 * self.marker_radius_px
        for label, dashes in (
            ("target", self.target_dashes),
            ("distractor", self.distractor_dashes if self.n_distractor_contours else 0),
        ):
            if not dashes:
                continue
            extent = self.expected_extent(dashes)
            if extent > usable:
                raise PathfinderInfeasibleError(
                    f"A {dashes}-dash {label} contour spans about {extent:.0f}px, "
                    f"more than the usable {usable}px of a {self.image_size}px image",
                    hint="Lower the dash count, shorten dashes, or raise image_size or curvature_jitter.",
                )
