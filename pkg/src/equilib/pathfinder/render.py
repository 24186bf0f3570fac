"""Integer-grid contour rendering.

Directions come from a fixed table of headings; each heading owns a Bresenham
ray, so a dash is always exactly ``dash_length_px`` pixels and nothing depends
on floating-point rasterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import HEADINGS

Pixel = tuple[int, int]

_RAY_REACH = 64


def bresenham(start: Pixel, end: Pixel) -> list[Pixel]:
    """Pixels on the segment from ``start`` to ``end``, both included."""

    r0, c0 = start
    r1, c1 = end
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    pixels: list[Pixel] = []
    err = dc - dr
    r, c = r0, c0
    while True:
        pixels.append((r, c))
        if (r, c) == (r1, c1):
            return pixels
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


@lru_cache(maxsize=None)
def heading_ray(heading: int, reach: int = _RAY_REACH) -> tuple[Pixel, ...]:
    """Offsets along ``heading``; entry ``j`` is ``j`` grid steps from the origin."""

    angle = 2.0 * math.pi * (heading % HEADINGS) / HEADINGS
    end = (int(round(-reach * math.sin(angle))), int(round(reach * math.cos(angle))))
    return tuple(bresenham((0, 0), end))


def disk(center: Pixel, radius: int, size: int) -> list[Pixel]:
    r0, c0 = center
    pixels: list[Pixel] = []
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            r, c = r0 + dr, c0 + dc
            if dr * dr + dc * dc <= radius * radius and 0 <= r < size and 0 <= c < size:
                pixels.append((r, c))
    return pixels


@dataclass(slots=True)
class Contour:
    vertices: list[Pixel] = field(default_factory=list)
    dashes: list[list[Pixel]] = field(default_factory=list)

    @property
    def pixels(self) -> list[Pixel]:
        return [p for dash in self.dashes for p in dash]

    def paint(self, canvas: np.ndarray) -> None:
        for r, c in self.pixels:
            canvas[r, c] = True


def turning_room(dash_length: int, gap_length: int, max_turn: int) -> int | None:
    """Straight run a walk needs ahead to turn away from a wall it faces.

    None when the walk cannot turn at all.
    """

    if max_turn == 0:
        return None
    stride = dash_length + gap_length
    radius = stride / (max_turn * 2.0 * math.pi / HEADINGS)
    return int(math.ceil(radius)) + 2 * stride


def walk_contour(
    rng: np.random.Generator,
    *,
    size: int,
    dashes: int,
    dash_length: int,
    gap_length: int,
    max_turn: int,
    forbidden: np.ndarray,
    start: Pixel,
    heading: int | None = None,
    exempt_first: np.ndarray | None = None,
    budget: int | None = None,
) -> Contour | None:
    """Random walk of ``dashes`` dashes, or None when the search gives up.

    ``forbidden`` marks pixels no dash may occupy. ``exempt_first`` is a
    region only the first dash may enter (the marker around the start).
    No two dashes may touch, even diagonally. Without ``heading`` the first
    dash may point anywhere.

    Turns that leave enough free run ahead are tried first, in random order;
    the rest follow by decreasing free run. A dead end backtracks to the
    previous dash. The search stops after ``budget`` placed dashes.
    """

    stride = dash_length + gap_length
    room = turning_room(dash_length, gap_length, max_turn)
    reach = max(_RAY_REACH, 2 * ((room or 0) + stride))
    if budget is None:
        budget = 20 * dashes
    owner = np.full((size, size), -1, dtype=np.int64)
    vertices: list[Pixel] = [start]
    headings: list[int] = []
    placed: list[list[Pixel]] = []

    def needed(index: int) -> int:
        remaining = dashes - index - 1
        if remaining == 0:
            return 0
        span = (remaining - 1) * stride + dash_length
        return span if room is None else min(span, room)

    def options(index: int) -> list[tuple[int, list[Pixel]]]:
        if index == 0:
            base = rng.permutation(HEADINGS) if heading is None else [heading]
        else:
            turns = rng.permutation(np.arange(-max_turn, max_turn + 1))
            base = [headings[-1] + int(turn) for turn in turns]
        position = vertices[-1]
        need = needed(index)
        clear: list[tuple[int, list[Pixel]]] = []
        cramped: list[tuple[int, int, list[Pixel]]] = []
        for candidate in base:
            candidate = int(candidate) % HEADINGS
            ray = heading_ray(candidate, reach)
            pixels = [(position[0] + dr, position[1] + dc) for dr, dc in ray[:dash_length]]
            if not _fits(pixels, index, owner, forbidden, exempt_first, size):
                continue
            ahead = (position[0] + ray[stride][0], position[1] + ray[stride][1])
            run = _free_run(ahead, ray, need, owner, forbidden, exempt_first, size)
            if run >= need:
                clear.append((candidate, pixels))
            else:
                cramped.append((run, candidate, pixels))
        cramped.sort(key=lambda item: -item[0])
        return clear + [(candidate, pixels) for _, candidate, pixels in cramped]

    stack = [options(0)]
    tried = 0
    while stack:
        if not stack[-1]:
            stack.pop()
            if placed:
                for r, c in placed.pop():
                    owner[r, c] = -1
                headings.pop()
                vertices.pop()
            continue
        if tried >= budget:
            return None
        tried += 1
        candidate, pixels = stack[-1].pop(0)
        index = len(placed)
        for r, c in pixels:
            owner[r, c] = index
        placed.append(pixels)
        headings.append(candidate)
        ray = heading_ray(candidate, reach)
        position = vertices[-1]
        vertices.append((position[0] + ray[stride][0], position[1] + ray[stride][1]))
        if len(placed) == dashes:
            return Contour(vertices=vertices, dashes=placed)
        stack.append(options(index + 1))
    return None


def _free_run(
    origin: Pixel,
    ray: tuple[Pixel, ...],
    limit: int,
    owner: np.ndarray,
    forbidden: np.ndarray,
    exempt_first: np.ndarray | None,
    size: int,
) -> int:
    """Pixels along ``ray`` from ``origin`` before the first blocked one, capped at ``limit``."""

    for step, (dr, dc) in enumerate(ray[:limit]):
        r, c = origin[0] + dr, origin[1] + dc
        if not (0 <= r < size and 0 <= c < size):
            return step
        if forbidden[r, c] or owner[r, c] >= 0:
            return step
        if exempt_first is not None and exempt_first[r, c]:
            return step
    return min(limit, len(ray))


def _fits(
    pixels: list[Pixel],
    index: int,
    owner: np.ndarray,
    forbidden: np.ndarray,
    exempt_first: np.ndarray | None,
    size: int,
) -> bool:
    for r, c in pixels:
        if not (0 <= r < size and 0 <= c < size):
            return False
        if forbidden[r, c]:
            return False
        if index > 0 and exempt_first is not None and exempt_first[r, c]:
            return False
        # Any earlier dash, the previous one included: a sharp turn must not retrace it.
        if np.any(owner[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2] >= 0):
            return False
    return True
