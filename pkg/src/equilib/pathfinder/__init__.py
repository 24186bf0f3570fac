"""Pathfinder contour-integration stimuli."""

from .config import HEADINGS, PathfinderConfig
from .dataset import generate_dataset
from .generator import (
    MAX_RETRIES,
    PathfinderSample,
    SampleMeta,
    check_separation,
    generate_sample,
)
from .metrics import iou, iou_from_logits
from .render import Contour, bresenham, disk, turning_room, walk_contour

__all__ = [
    "HEADINGS",
    "MAX_RETRIES",
    "Contour",
    "PathfinderConfig",
    "PathfinderSample",
    "SampleMeta",
    "bresenham",
    "check_separation",
    "disk",
    "generate_dataset",
    "generate_sample",
    "iou",
    "iou_from_logits",
    "turning_room",
    "walk_contour",
]
