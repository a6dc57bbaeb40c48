"""Batched matrix products and normalized exponentials."""

import numpy as np

from functions.base import Function, broadcast_shape, unbroadcast
from tensor.tensor import ShapeError, Tensor


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError(f"matmul needs at least 2-D operands, got {a.shape} @ {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
        broadcast_shape(a.shape[:-2], b.shape[:-2])
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray):
        ga = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        gb = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return unbroadcast(ga, self.a.shape), unbroadcast(gb, self.b.shape)


class Softmax(Function):
    def forward(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        # NaN inputs propagate to the whole slice
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.axis = axis
        self.out = e / np.sum(e, axis=axis, keepdims=True)
        return self.out

    def backward(self, grad: np.ndarray):
        inner = np.sum(grad * self.out, axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class LogSoftmax(Function):
    def forward(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        shifted = x - np.max(x, axis=axis, keepdims=True)
        lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
        self.axis = axis
        self.out = shifted - lse
        return self.out

    def backward(self, grad: np.ndarray):
        probs = np.exp(self.out)
        return (grad - probs * np.sum(grad, axis=self.axis, keepdims=True),)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)
