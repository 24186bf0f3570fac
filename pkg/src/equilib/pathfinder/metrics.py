from __future__ import annotations

import numpy as np

from equilib.errors import ShapeMismatchError


def iou(pred_mask: np.ndarray, true_mask: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""

    pred = np.asarray(pred_mask, dtype=bool)
    true = np.asarray(true_mask, dtype=bool)
    if pred.shape != true.shape:
        raise ShapeMismatchError(
            f"Prediction shape {pred.shape} does not match mask shape {true.shape}"
        )
    union = np.count_nonzero(pred | true)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & true) / union


def iou_from_logits(logits: np.ndarray, true_mask: np.ndarray) -> float:
    """IoU after thresholding logits at 0 (probability 0.5)."""

    return iou(np.asarray(logits) > 0.0, true_mask)
