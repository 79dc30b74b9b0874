"""Segmentation quality metrics on thresholded binary masks."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


def _binarize(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask) > 0.5


def dice_score(pred: np.ndarray, target: np.ndarray) -> float:
    """Dice similarity as a percentage; two empty masks count as 100."""
    pred, target = _binarize(pred), _binarize(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mask extents differ: {pred.shape} vs {target.shape}")
    total = pred.sum() + target.sum()
    if total == 0:
        return 100.0
    return 200.0 * np.logical_and(pred, target).sum() / total


def iou_score(pred: np.ndarray, target: np.ndarray) -> float:
    """Intersection-over-union as a percentage; two empty masks count as 100."""
    pred, target = _binarize(pred), _binarize(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mask extents differ: {pred.shape} vs {target.shape}")
    union = np.logical_or(pred, target).sum()
    if union == 0:
        return 100.0
    return 100.0 * np.logical_and(pred, target).sum() / union
