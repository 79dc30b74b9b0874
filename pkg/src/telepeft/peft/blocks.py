"""Auxiliary trainable blocks used by the feature-level placement variant."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import RngStream, Tensor
from ..model.layers import BatchNorm2d, Conv2d, LayerNorm, Linear, MultiHeadAttention
from ..model.module import Module
from .schedules import shared_cross_modal_dim

CROSS_MODAL_HEADS = 4
ENHANCE_CHANNELS = 4


class CrossModalBlock(Module):
    """Attention bridge adding text-aware context to the conditional vector.

    Both modalities are projected (with layer norm) into a shared width
    max(32, d_base/2); a 4-head attention with the pooled vision vector as
    query and the adapted text vector as key/value is projected back to the
    conditioning width and added to the original conditional embedding. The
    back projection starts at zero, so attaching the block changes nothing.
    """

    def __init__(self, d_vision: int, d_text: int, cond_dim: int, d_base: int, rng: RngStream):
        super().__init__()
        d_shared = shared_cross_modal_dim(d_base)
        self.v_proj = Linear(d_vision, d_shared, rng.child("v_proj"))
        self.v_norm = LayerNorm(d_shared)
        self.t_proj = Linear(d_text, d_shared, rng.child("t_proj"))
        self.t_norm = LayerNorm(d_shared)
        self.attn = MultiHeadAttention(d_shared, CROSS_MODAL_HEADS, rng.child("attn"))
        self.back = Linear(d_shared, cond_dim, rng.child("back"), zero=True)
        self.d_shared = d_shared

    def forward(self, cond: Tensor, v_pooled: Tensor, z_adapted: Tensor) -> Tensor:
        """cond/v_pooled/z_adapted are (B, width) vectors; returns updated cond."""
        b = v_pooled.shape[0]
        v = self.v_norm.forward(self.v_proj.forward(v_pooled))
        t = self.t_norm.forward(self.t_proj.forward(z_adapted))
        v_tok = ad.reshape(v, (b, 1, self.d_shared))
        t_tok = ad.reshape(t, (b, 1, self.d_shared))
        crossed = self.attn.forward(v_tok, t_tok, t_tok)
        delta = self.back.forward(ad.reshape(crossed, (b, self.d_shared)))
        return ad.add(cond, delta)


class DecoderEnhancement(Module):
    """Multiplicative attention mask over the decoder logits.

    mask = sigmoid(conv1x1(SiLU(BN(conv3x3(logits))))), output = logits * mask.
    Mask entries live strictly inside (0, 1), so the block can only attenuate.
    """

    def __init__(self, rng: RngStream, channels: int = ENHANCE_CHANNELS):
        super().__init__()
        self.conv3 = Conv2d(1, channels, 3, rng.child("conv3"))
        self.bn = BatchNorm2d(channels)
        self.conv1 = Conv2d(channels, 1, 1, rng.child("conv1"), zero=True)

    def forward(self, logits: Tensor) -> Tensor:
        h = self.conv3.forward(logits)
        h = self.bn.forward(h)
        h = ad.silu(h)
        mask = ad.sigmoid(self.conv1.forward(h))
        return ad.mul(logits, mask)

    def attention_mask(self, logits: Tensor) -> np.ndarray:
        """Inspection helper; evaluates with running stats, mutating nothing."""
        was_training = self.training
        self.eval()
        try:
            with ad.no_grad():
                h = ad.silu(self.bn.forward(self.conv3.forward(logits)))
                return ad.sigmoid(self.conv1.forward(h)).data
        finally:
            self.train(was_training)
