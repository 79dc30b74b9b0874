"""Composite segmentation loss: weighted Dice plus binary cross-entropy."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import DimensionError, InputError


def dice_loss(logits: Tensor, mask: np.ndarray, eps: float = 1.0) -> Tensor:
    """Soft Dice over every pixel in the batch: 1 - (2*sum(p*g)+eps)/(sum(p)+sum(g)+eps)."""
    p = ad.sigmoid(logits)
    g = Tensor(mask)
    intersection = ad.tsum(ad.mul(p, g))
    denom = ad.add(ad.tsum(p), ad.tsum(g))
    ratio = ad.div(
        ad.add(ad.scale(intersection, 2.0), Tensor(eps)),
        ad.add(denom, Tensor(eps)),
    )
    return ad.sub(Tensor(1.0), ratio)


def composite_loss(
    logits: Tensor,
    mask: np.ndarray,
    lambda_dice: float = 1.5,
    lambda_bce: float = 1.0,
    eps: float = 1.0,
) -> Tensor:
    """lambda_d * Dice + lambda_BCE * BCE, with BCE in the stable logit form."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != logits.shape:
        raise DimensionError(
            f"logits {logits.shape} and mask {mask.shape} extents differ"
        )
    if not np.isin(mask, (0.0, 1.0)).all():
        raise InputError("mask must be binary (values in {0, 1})")
    return ad.add(
        ad.scale(dice_loss(logits, mask, eps), lambda_dice),
        ad.scale(ad.bce_with_logits(logits, mask), lambda_bce),
    )
