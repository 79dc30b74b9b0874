"""AdamW with decoupled weight decay, plus the plateau scheduler and the
early-stopping monitor. The latter two are pure functions of their own
state and inputs: replaying the same loss/metric history reproduces every
decision."""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor
from ..errors import UsageError


class AdamW:
    """Decoupled weight decay: the decay term hits the weights directly and
    never enters the gradient moments. Only tensors that require gradients
    may be registered; frozen tensors are never touched."""

    def __init__(
        self,
        named_params,
        lr: float,
        weight_decay: float = 0.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params: list[tuple[str, Tensor]] = []
        for name, tensor in named_params:
            if not tensor.requires_grad:
                raise UsageError(f"refusing to optimize frozen tensor {name!r}")
            self.params.append((name, tensor))
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.state = {
            name: {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data)}
            for name, p in self.params
        }

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            s = self.state[name]
            s["m"] = self.beta1 * s["m"] + (1.0 - self.beta1) * g
            s["v"] = self.beta2 * s["v"] + (1.0 - self.beta2) * (g * g)
            m_hat = s["m"] / bc1
            v_hat = s["v"] / bc2
            p.data = p.data - self.lr * (
                m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data
            )

    def scalar_count(self) -> int:
        return sum(p.data.size for _, p in self.params)


class PlateauScheduler:
    """Cut the learning rate by `factor` after `patience` consecutive epochs
    without a strict decrease in validation loss; the counter resets on
    improvement or on a reduction."""

    def __init__(self, lr: float, factor: float = 0.3, patience: int = 5):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr


class EarlyStopper:
    """Stop after `patience` consecutive epochs without a strict increase in
    the monitored score; remembers when the best value was seen."""

    def __init__(self, patience: int = 20):
        self.patience = patience
        self.best = -math.inf
        self.best_epoch: int | None = None
        self.bad_epochs = 0

    def step(self, score: float, epoch: int) -> bool:
        if score > self.best:
            self.best = score
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience
