"""Low-rank additive updates for frozen attention projections.

Each adapted projection W gains a pair (A: d x r, B: r x d); the forward
contribution is (x @ A) @ B with no dropout, norm, or extra scaling. A is
Gaussian, B starts at zero, so a freshly attached pair is an exact identity.
Merging W + A @ B must reproduce the unmerged forward, which the tests use
as an algebraic oracle.
"""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import RngStream, Tensor
from ..model.module import Module

LORA_POSITIONS = ("lora_q", "lora_k", "lora_v", "lora_out")


class LoraPair(Module):
    def __init__(self, d: int, rank: int, rng: RngStream):
        super().__init__()
        self.a = ad.parameter(rng.normal((d, rank), std=1.0 / math.sqrt(d)))
        self.b = ad.parameter(np.zeros((rank, d)))

    def forward(self, x: Tensor, training: bool) -> Tensor | None:
        # Exact pass-through while the up matrix is still zero in eval mode.
        if not training and not self.b.data.any():
            return None
        return ad.matmul(ad.matmul(x, self.a), self.b)

    def merged_delta(self) -> np.ndarray:
        return self.a.data @ self.b.data


def lora_param_count(d: int, rank: int) -> int:
    """Scalars in one (A, B) pair."""
    return 2 * d * rank
