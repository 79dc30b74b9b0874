"""Reusable layers built on the autodiff primitives."""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import RngStream, Tensor
from .module import Module


class Linear(Module):
    """Affine map on the last axis: x @ w + b, weights (d_in, d_out)."""

    def __init__(self, d_in: int, d_out: int, rng: RngStream, std: float | None = None, zero: bool = False):
        super().__init__()
        if zero:
            w = np.zeros((d_in, d_out))
        else:
            w = rng.normal((d_in, d_out), std=std if std is not None else 1.0 / math.sqrt(d_in))
        self.w = ad.parameter(w)
        self.b = ad.parameter(np.zeros(d_out))

    def forward(self, x: Tensor) -> Tensor:
        return ad.affine(x, self.w, self.b)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.gain = ad.parameter(np.ones(dim))
        self.bias = ad.parameter(np.zeros(dim))
        self._eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias, self._eps)


class Conv2d(Module):
    """Stride-1 conv layer with bias; weight (c_out, c_in, k, k)."""

    def __init__(self, c_in: int, c_out: int, k: int, rng: RngStream, zero: bool = False, padding: str = "same"):
        super().__init__()
        fan_in = c_in * k * k
        w = np.zeros((c_out, c_in, k, k)) if zero else rng.normal((c_out, c_in, k, k), std=1.0 / math.sqrt(fan_in))
        self.w = ad.parameter(w)
        self.b = ad.parameter(np.zeros(c_out))
        self._padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.w, self.b, self._padding)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gain = ad.parameter(np.ones(channels))
        self.bias = ad.parameter(np.zeros(channels))
        self.stats = ad.BatchNormState(channels)
        self._momentum = momentum
        self._eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return ad.batch_norm2d(
            x, self.gain, self.bias, self.stats, self.training, self._momentum, self._eps
        )


class MultiHeadAttention(Module):
    """Self- or cross-attention assembled from matmul and softmax.

    Optional low-rank deltas can be hung on each projection (the attached
    plan wires them); projection(x) then becomes x@W + b + (x@A)@B.
    """

    def __init__(self, dim: int, heads: int, rng: RngStream, out_std: float | None = None):
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.wq = Linear(dim, dim, rng.child("wq"))
        self.wk = Linear(dim, dim, rng.child("wk"))
        self.wv = Linear(dim, dim, rng.child("wv"))
        self.wo = Linear(dim, dim, rng.child("wo"), std=out_std)
        self._lora: dict | None = None
        self._heads = heads
        self._head_dim = dim // heads

    def _project(self, name: str, layer: Linear, x: Tensor) -> Tensor:
        out = layer.forward(x)
        if self._lora and name in self._lora:
            delta = self._lora[name].forward(x, self.training)
            if delta is not None:
                out = ad.add(out, delta)
        return out

    def _split(self, x: Tensor) -> Tensor:
        b, t, _ = x.shape
        x = ad.reshape(x, (b, t, self._heads, self._head_dim))
        return ad.transpose(x, (0, 2, 1, 3))  # (B, h, T, hd)

    def forward(self, query: Tensor, key: Tensor | None = None, value: Tensor | None = None, attn_mask: Tensor | None = None) -> Tensor:
        key = query if key is None else key
        value = key if value is None else value
        b, tq, d = query.shape
        q = self._split(self._project("q", self.wq, query))
        k = self._split(self._project("k", self.wk, key))
        v = self._split(self._project("v", self.wv, value))
        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(self._head_dim))
        if attn_mask is not None:
            scores = ad.add(scores, attn_mask)
        att = ad.softmax(scores)
        out = ad.matmul(att, v)  # (B, h, Tq, hd)
        out = ad.reshape(ad.transpose(out, (0, 2, 1, 3)), (b, tq, d))
        return self._project("out", self.wo, out)

    def attention_weights(self, query: Tensor, key: Tensor, value: Tensor) -> np.ndarray:
        """Per-head attention distribution, for inspection only."""
        with ad.no_grad():
            q = self._split(self._project("q", self.wq, query))
            k = self._split(self._project("k", self.wk, key))
            scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(self._head_dim))
            return ad.softmax(scores).data


class Mlp(Module):
    def __init__(self, dim: int, hidden: int, rng: RngStream, out_std: float | None = None):
        super().__init__()
        self.fc1 = Linear(dim, hidden, rng.child("fc1"))
        self.fc2 = Linear(hidden, dim, rng.child("fc2"), std=out_std)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2.forward(ad.silu(self.fc1.forward(x)))


class TransformerBlock(Module):
    """Pre-norm block with hook points on both sublayer outputs.

    The hooks see each sublayer output just before it is added back to the
    residual stream, which is where the bottleneck adapters sit. Hook slots
    hold references owned by the attached plan, so they are not registered
    as child modules here.
    """

    def __init__(self, dim: int, heads: int, mlp_ratio: int, rng: RngStream, depth_scale: float = 1.0):
        super().__init__()
        out_std = depth_scale / math.sqrt(dim)
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng.child("attn"), out_std=out_std)
        self.ln2 = LayerNorm(dim)
        self.mlp = Mlp(dim, dim * mlp_ratio, rng.child("mlp"), out_std=depth_scale / math.sqrt(dim * mlp_ratio))
        self._adapter_attn: Module | None = None
        self._adapter_mlp: Module | None = None

    def forward(self, x: Tensor, attn_mask: Tensor | None = None):
        a = self.attn.forward(self.ln1.forward(x), attn_mask=attn_mask)
        if self._adapter_attn is not None:
            a = self._adapter_attn.forward(a)
        x = ad.add(x, a)
        m = self.mlp.forward(self.ln2.forward(x))
        if self._adapter_mlp is not None:
            m = self._adapter_mlp.forward(m)
        x = ad.add(x, m)
        return x, a, m
