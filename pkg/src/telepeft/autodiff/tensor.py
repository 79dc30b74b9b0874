"""Dense tensors with reverse-mode automatic differentiation.

Every operation the segmentation model and its adapters need is defined
here as a forward computation plus a closure that pushes gradients to its
parents. Graphs are built eagerly; `Tensor.backward()` walks them once in
reverse topological order and accumulates gradients on tracked leaves.

Compute precision defaults to 64-bit floats so gradient checks can run at
tight tolerances; `set_default_dtype("float32")` switches the whole engine
to single precision.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import DimensionError, ParameterError, UsageError
from .rng import RngStream

_DTYPE = np.float64
_GRAD_ENABLED = True


def set_default_dtype(name: str) -> None:
    global _DTYPE
    if name not in ("float64", "float32"):
        raise ParameterError(f"unsupported dtype {name!r}")
    _DTYPE = np.float64 if name == "float64" else np.float32


def default_dtype():
    return _DTYPE


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (used for evaluation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A dense n-dimensional array, optionally tracked for gradients."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._backward = None
        self._prev: tuple = ()
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) onto every tracked leaf.

        `self` must be scalar. Intermediate nodes keep no gradient; repeated
        calls keep adding into leaf `.grad` buffers until cleared.
        """
        if self.data.size != 1:
            raise UsageError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        # Per-call gradient buffers; only leaves receive persistent .grad.
        local: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = local.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in local:
                    local[key] = local[key] + pg
                else:
                    local[key] = pg

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape`, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_DTYPE), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=_DTYPE), requires_grad=requires_grad)


# -- elementwise arithmetic ------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape)))

    return _node(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(-g, b.data.shape)))

    return _node(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (
            (a, _unbroadcast(g * b.data, a.data.shape)),
            (b, _unbroadcast(g * a.data, b.data.shape)),
        )

    return _node(a.data * b.data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return (
            (a, _unbroadcast(g / b.data, a.data.shape)),
            (b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)),
        )

    return _node(a.data / b.data, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g):
        return ((a, g * factor),)

    return _node(a.data * factor, (a,), backward)


def power(a: Tensor, exponent: float) -> Tensor:
    def backward(g):
        return ((a, g * exponent * np.power(a.data, exponent - 1.0)),)

    return _node(np.power(a.data, exponent), (a,), backward)


# -- linear algebra and shape ops -------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports stacked leading axes on either side."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError(
            f"matmul requires 2-d operands, got {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner extents differ: {a.data.shape} @ {b.data.shape}"
        )

    def backward(g):
        grads = []
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            grads.append((a, _unbroadcast(ga, a.data.shape)))
        if b.requires_grad:
            if b.data.ndim == 2 and g.ndim > 2:
                # Stacked input against a plain weight matrix: one flat GEMM
                # instead of a per-slice product followed by a reduction.
                k, n = b.data.shape
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = _unbroadcast(
                    np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape
                )
            grads.append((b, gb))
        return tuple(grads)

    return _node(np.matmul(a.data, b.data), (a, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused x @ w + b for 2-d weights; the workhorse of every linear layer."""
    if x.data.ndim < 2 or w.data.ndim != 2:
        raise DimensionError(
            f"affine needs stacked input and a 2-d weight, got {x.data.shape}, {w.data.shape}"
        )
    if x.data.shape[-1] != w.data.shape[0]:
        raise DimensionError(f"affine inner extents differ: {x.data.shape} @ {w.data.shape}")
    k, n = w.data.shape

    def backward(g):
        grads = []
        g2 = g.reshape(-1, n)
        if x.requires_grad:
            grads.append((x, np.matmul(g, w.data.T)))
        if w.requires_grad:
            grads.append((w, x.data.reshape(-1, k).T @ g2))
        if b.requires_grad:
            grads.append((b, g2.sum(axis=0)))
        return tuple(grads)

    return _node(np.matmul(x.data, w.data) + b.data, (x, w, b), backward)


def transpose(a: Tensor, axes: tuple) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return ((a, np.transpose(g, inverse)),)

    return _node(np.transpose(a.data, axes), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    original = a.data.shape

    def backward(g):
        return ((a, g.reshape(original)),)

    return _node(np.reshape(a.data, shape), (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, offsets, axis=axis)
        return tuple(zip(tensors, pieces))

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def take_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather one row per batch element: (B, T, d), (B,) -> (B, d)."""
    if a.data.ndim != 3:
        raise DimensionError(f"take_rows expects a 3-d tensor, got {a.data.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    batch = np.arange(a.data.shape[0])

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[batch, idx] = g
        return ((a, ga),)

    return _node(a.data[batch, idx], (a,), backward)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.data.shape).copy()),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gk, a.data.shape).copy()),)

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]

    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g / count, a.data.shape).copy()),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gk / count, a.data.shape).copy()),)

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


# -- nonlinearities ----------------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # 0.5*(1 + tanh(x/2)) saturates gracefully at both ends and vectorizes
    # far better than the logaddexp form.
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def backward(g):
        f = 1.0 - s
        f *= s
        f *= g
        return ((a, f),)

    return _node(s, (a,), backward)


def silu(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def backward(g):
        f = 1.0 - s
        f *= a.data
        f += 1.0
        f *= s
        f *= g
        return ((a, f),)

    return _node(a.data * s, (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax along the last axis."""
    s = a.data - a.data.max(axis=-1, keepdims=True)
    np.exp(s, out=s)
    s /= s.sum(axis=-1, keepdims=True)

    def backward(g):
        f = g - (g * s).sum(axis=-1, keepdims=True)
        f *= s
        return ((a, f),)

    return _node(s, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then affine."""
    if eps <= 0:
        raise ParameterError(f"layer_norm eps must be positive, got {eps}")
    d = a.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise DimensionError(
            f"layer_norm affine shapes {gain.data.shape}/{bias.data.shape} "
            f"do not match feature width {d}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        g_gain = (g * xhat).sum(axis=lead)
        g_bias = g.sum(axis=lead)
        gx_hat = g * gain.data
        gx = inv_std * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return ((a, gx), (gain, g_gain), (bias, g_bias))

    return _node(xhat * gain.data + bias.data, (a, gain, bias), backward)


def dropout(a: Tensor, p: float, training: bool, rng: RngStream) -> Tensor:
    """Inverted dropout: scales at train time so eval is a strict identity."""
    if not (0.0 <= p < 1.0):
        raise ParameterError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = (rng.uniform(a.data.shape) >= p).astype(a.data.dtype)
    factor = 1.0 / (1.0 - p)

    def backward(g):
        return ((a, g * keep * factor),)

    return _node(a.data * keep * factor, (a,), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.intp)

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return ((table, gt),)

    return _node(table.data[ids], (table,), backward)


# -- convolution and friends -------------------------------------------------


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(B, C, H, W) -> (B, OH*OW, C*kh*kw) patch matrix."""
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    b, c, oh, ow = windows.shape[:4]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, c * kh * kw)


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    padding: str = "same",
) -> Tensor:
    """Cross-correlation with stride 1; accepts (C, H, W) or (B, C, H, W)."""
    if padding not in ("same", "none"):
        raise ParameterError(f"unknown padding {padding!r}")
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or kernel.data.ndim != 4:
        raise DimensionError(
            f"conv2d expects 4-d input/kernel, got {x.data.shape}, {kernel.data.shape}"
        )
    cout, cin, kh, kw = kernel.data.shape
    if xd.shape[1] != cin:
        raise DimensionError(
            f"conv2d channel mismatch: input has {xd.shape[1]}, kernel expects {cin}"
        )
    ph, pw = (kh // 2, kw // 2) if padding == "same" else (0, 0)
    xp = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if padding == "same" else xd
    if kh > xp.shape[2] or kw > xp.shape[3]:
        raise DimensionError(
            f"kernel {kernel.data.shape} larger than padded input {xp.shape}"
        )
    b = xp.shape[0]
    oh, ow = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    cols = _im2col(xp, kh, kw)
    wmat = kernel.data.reshape(cout, cin * kh * kw)
    out = np.matmul(cols, wmat.T)  # (B, OH*OW, Cout)
    if bias is not None:
        out = out + bias.data
    out = out.transpose(0, 2, 1).reshape(b, cout, oh, ow)

    def backward(g):
        gmat = g.reshape(b, cout, oh * ow).transpose(0, 2, 1)  # (B, OH*OW, Cout)
        g_w = np.tensordot(gmat, cols, axes=([0, 1], [0, 1])).reshape(kernel.data.shape)
        g_cols = np.matmul(gmat, wmat)  # (B, OH*OW, C*kh*kw)
        g6 = g_cols.reshape(b, oh, ow, cin, kh, kw).transpose(0, 3, 4, 5, 1, 2)
        gx = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i : i + oh, j : j + ow] += g6[:, :, i, j]
        if padding == "same":
            gx = gx[:, :, ph : ph + xd.shape[2], pw : pw + xd.shape[3]]
        if squeeze:
            gx = gx[0]
        grads = [(x, gx), (kernel, g_w)]
        if bias is not None:
            grads.append((bias, gmat.sum(axis=(0, 1))))
        return tuple(grads)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _node(out[0] if squeeze else out, parents, backward)


class BatchNormState:
    """Running statistics for one batch-norm layer (not gradient-updated)."""

    def __init__(self, channels: int):
        self.mean = np.zeros(channels, dtype=_DTYPE)
        self.var = np.ones(channels, dtype=_DTYPE)


def batch_norm2d(
    x: Tensor,
    gain: Tensor,
    bias: Tensor,
    state: BatchNormState,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch norm over (B, H, W); updates running stats in training."""
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    c = xd.shape[1]
    if gain.data.shape != (c,) or bias.data.shape != (c,):
        raise DimensionError(f"batch_norm affine mismatch for {c} channels")
    axes = (0, 2, 3)
    if training:
        mu = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        state.mean = (1 - momentum) * state.mean + momentum * mu
        state.var = (1 - momentum) * state.var + momentum * var
    else:
        mu, var = state.mean, state.var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu[:, None, None]) * inv_std[:, None, None]
    out = xhat * gain.data[:, None, None] + bias.data[:, None, None]
    n = xd.shape[0] * xd.shape[2] * xd.shape[3]

    def backward(g):
        gd = g[None] if squeeze else g
        g_gain = (gd * xhat).sum(axis=axes)
        g_bias = gd.sum(axis=axes)
        gxh = gd * gain.data[:, None, None]
        if training:
            gx = (
                inv_std[:, None, None]
                / n
                * (
                    n * gxh
                    - gxh.sum(axis=axes)[:, None, None]
                    - xhat * (gxh * xhat).sum(axes)[:, None, None]
                )
            )
        else:
            gx = gxh * inv_std[:, None, None]
        if squeeze:
            gx = gx[0]
        return ((x, gx), (gain, g_gain), (bias, g_bias))

    return _node(out[0] if squeeze else out, (x, gain, bias), backward)


def _upsample_matrix(n: int, mode: str) -> np.ndarray:
    """(2n, n) interpolation matrix doubling one spatial axis."""
    m = np.zeros((2 * n, n), dtype=_DTYPE)
    if mode == "nearest":
        for i in range(2 * n):
            m[i, i // 2] = 1.0
        return m
    if mode != "bilinear":
        raise ParameterError(f"unknown upsample mode {mode!r}")
    for i in range(2 * n):
        src = (i + 0.5) / 2.0 - 0.5
        lo = int(np.floor(src))
        w = src - lo
        m[i, min(max(lo, 0), n - 1)] += 1.0 - w
        m[i, min(max(lo + 1, 0), n - 1)] += w
    return m


def upsample2x(x: Tensor, mode: str = "bilinear") -> Tensor:
    """Double both spatial axes of (..., C, H, W) by interpolation."""
    h, w = x.data.shape[-2], x.data.shape[-1]
    mh = _upsample_matrix(h, mode)
    mw = _upsample_matrix(w, mode)
    out = np.einsum("ph,...hw,qw->...pq", mh, x.data, mw, optimize=True)

    def backward(g):
        gx = np.einsum("ph,...pq,qw->...hw", mh, g, mw, optimize=True)
        return ((x, gx),)

    return _node(out, (x,), backward)


# -- fused losses -------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy in the overflow-safe logit form."""
    x = logits.data
    y = np.asarray(targets, dtype=x.dtype)
    if x.shape != y.shape:
        raise DimensionError(f"bce shapes differ: {x.shape} vs {y.shape}")
    loss = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    n = x.size

    def backward(g):
        return ((logits, g * (_sigmoid(x) - y) / n),)

    return _node(loss.mean(), (logits,), backward)
