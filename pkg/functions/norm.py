"""Instance and layer normalization (pre-affine)."""

from typing import Sequence

import numpy as np

from functions.base import Function
from tensor.tensor import ShapeError, Tensor


class Normalize(Function):
    """Zero mean, unit variance over ``axes`` (biased variance, eps inside the root)."""

    def forward(self, x: np.ndarray, axes: tuple[int, ...] = (), eps: float = 1e-5) -> np.ndarray:
        if eps <= 0:
            raise ValueError("eps must be positive")
        mean = x.mean(axis=axes, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=axes, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.out = centered * self.inv_std
        self.axes = axes
        return self.out

    def backward(self, grad: np.ndarray):
        y, axes = self.out, self.axes
        g_mean = grad.mean(axis=axes, keepdims=True)
        gy_mean = (grad * y).mean(axis=axes, keepdims=True)
        return (self.inv_std * (grad - g_mean - y * gy_mean),)


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each (batch, channel) slab over its spatial extents."""
    if x.ndim < 3:
        raise ShapeError(f"instance_norm needs (B, C, ...) input, got {x.shape}")
    return Normalize.apply(x, axes=tuple(range(2, x.ndim)), eps=eps)


def layer_norm(x: Tensor, normalized_extents: Sequence[int], eps: float = 1e-5) -> Tensor:
    """Normalize each token over its trailing ``normalized_extents``."""
    k = len(normalized_extents)
    if tuple(x.shape[-k:]) != tuple(normalized_extents):
        raise ShapeError(f"layer_norm extents {tuple(normalized_extents)} do not trail {x.shape}")
    return Normalize.apply(x, axes=tuple(range(x.ndim - k, x.ndim)), eps=eps)
