"""AdamW with decoupled weight decay."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from models.state import TrainState
from network.module import Parameter


def adamw_step(
    params: Mapping[str, Parameter],
    state: TrainState,
    lr: float = 1e-4,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> None:
    """Apply one AdamW update in place and advance ``state.step``.

    Per parameter p with gradient g at step t (1-based):
        p <- p - lr * wd * p
        m <- b1 * m + (1 - b1) * g;  v <- b2 * v + (1 - b2) * g^2
        p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)

    A parameter without a gradient is treated as having a zero gradient.
    """
    beta1, beta2 = betas
    t = state.step + 1
    bias1 = 1.0 - beta1**t
    bias2 = 1.0 - beta2**t
    for name, p in params.items():
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.exp_avg.setdefault(name, np.zeros_like(p.data))
        v = state.exp_avg_sq.setdefault(name, np.zeros_like(p.data))
        if m.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"moment buffers of {name} do not match parameter shape {p.shape}")
        if weight_decay:
            p.data -= lr * weight_decay * p.data
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
    state.step = t


class AdamW:
    """Binds hyperparameters and a model's named parameters to `adamw_step`."""

    def __init__(
        self,
        params: Mapping[str, Parameter],
        lr: float = 1e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = dict(params)
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay

    def step(self, state: TrainState) -> None:
        adamw_step(self.params, state, self.lr, self.betas, self.eps, self.weight_decay)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
