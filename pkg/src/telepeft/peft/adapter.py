"""The bottleneck adapter.

adapted(f) = f + alpha * (W_up . Dropout . SiLU . Norm . W_down)(f)

applied in exactly that order: down-project, layer-norm over the bottleneck,
SiLU, dropout at a fixed 0.1 rate, up-project, scale by the learnable alpha
(initialised to 0.1), residual add. Both projections carry biases and the
norm is affine; alpha scales the whole branch including the up bias, so
alpha = 0 is an exact identity.
"""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import RngStream, Tensor
from ..errors import DimensionError
from ..model.module import Module

ALPHA_INIT = 0.1
DROPOUT_RATE = 0.1


class Adapter(Module):
    """One adapter instance acting on features of width `d` through a
    bottleneck of width `d_bottleneck`."""

    def __init__(self, d: int, d_bottleneck: int, rng: RngStream):
        super().__init__()
        self.w_down = ad.parameter(rng.normal((d, d_bottleneck), std=1.0 / math.sqrt(d)))
        self.b_down = ad.parameter(np.zeros(d_bottleneck))
        self.norm_gain = ad.parameter(np.ones(d_bottleneck))
        self.norm_bias = ad.parameter(np.zeros(d_bottleneck))
        self.w_up = ad.parameter(rng.normal((d_bottleneck, d), std=1.0 / math.sqrt(d_bottleneck)))
        self.b_up = ad.parameter(np.zeros(d))
        self.alpha = ad.parameter(np.asarray(ALPHA_INIT))
        self._d = d
        self._drop_rng = rng.child("dropout")

    def forward(self, f: Tensor) -> Tensor:
        if f.shape[-1] != self._d:
            raise DimensionError(
                f"adapter expects feature width {self._d}, got {f.shape}"
            )
        # Strict identity in eval mode when the residual scale is zero;
        # keeps zero-alpha outputs bit-for-bit equal to the plain backbone.
        if not self.training and not self.alpha.data.any():
            return f
        h = ad.add(ad.matmul(f, self.w_down), self.b_down)
        h = ad.layer_norm(h, self.norm_gain, self.norm_bias)
        h = ad.silu(h)
        h = ad.dropout(h, DROPOUT_RATE, self.training, self._drop_rng)
        h = ad.add(ad.matmul(h, self.w_up), self.b_up)
        return ad.add(f, ad.mul(self.alpha, h))

    def param_count(self) -> int:
        return sum(t.data.size for _, t in self.named_parameters())


def adapter_param_count(d: int, d_bottleneck: int) -> int:
    """Trainable scalars in one adapter: 2*d*d' + 3*d' + d + 1."""
    return 2 * d * d_bottleneck + 3 * d_bottleneck + d + 1
