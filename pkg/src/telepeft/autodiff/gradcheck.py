"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .tensor import Tensor, no_grad


def finite_difference_check(f, x: Tensor, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` maps a Tensor to a scalar Tensor. The analytic gradient comes from
    one backward pass; each coordinate of `x` is then nudged by ±h with
    graph construction disabled. Relative error is
    |analytic - numeric| / (|analytic| + |numeric| + 1e-12), maximised over
    coordinates.
    """
    if h <= 0:
        raise ParameterError(f"step size must be positive, got {h}")
    probe = Tensor(x.data.copy(), requires_grad=True)
    f(probe).backward()
    analytic = probe.grad.copy() if probe.grad is not None else np.zeros_like(probe.data)

    numeric = np.zeros_like(probe.data)
    flat = probe.data.reshape(-1)
    nflat = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up = f(probe).item()
            flat[i] = original - h
            down = f(probe).item()
            flat[i] = original
            nflat[i] = (up - down) / (2.0 * h)

    err = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-12)
    return float(err.max()) if err.size else 0.0
