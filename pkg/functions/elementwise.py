"""Elementwise arithmetic and activations."""

import numpy as np
from scipy.special import expit

from functions.base import Function, broadcast_shape, unbroadcast
from tensor.tensor import Tensor


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape(a.shape, b.shape)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape(a.shape, b.shape)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape(a.shape, b.shape)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray):
        return unbroadcast(grad * self.b, self.a.shape), unbroadcast(grad * self.a, self.b.shape)


class Div(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape(a.shape, b.shape)
        self.a, self.b = a, b
        return a / b

    def backward(self, grad: np.ndarray):
        ga = grad / self.b
        gb = -grad * self.a / (self.b * self.b)
        return unbroadcast(ga, self.a.shape), unbroadcast(gb, self.b.shape)


class Neg(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        return -x

    def backward(self, grad: np.ndarray):
        return (-grad,)


class Exp(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.exp(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return np.log(x)

    def backward(self, grad: np.ndarray):
        return (grad / self.x,)


class Sqrt(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * 0.5 / self.out,)


class Relu(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        # strict: the gradient at exactly 0 is 0
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad: np.ndarray):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = expit(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out * (1 - self.out),)


class Silu(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.sig = expit(x)
        return x * self.sig

    def backward(self, grad: np.ndarray):
        return (grad * self.sig * (1 + self.x * (1 - self.sig)),)


class Softplus(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return np.logaddexp(0, x).astype(x.dtype)

    def backward(self, grad: np.ndarray):
        return (grad * expit(self.x),)


class ClampMin(Function):
    def forward(self, x: np.ndarray, minimum: float = 0.0) -> np.ndarray:
        self.mask = x > minimum
        return np.where(self.mask, x, minimum).astype(x.dtype)

    def backward(self, grad: np.ndarray):
        return (grad * self.mask,)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def div(a: Tensor, b: Tensor) -> Tensor:
    return Div.apply(a, b)


def neg(x: Tensor) -> Tensor:
    return Neg.apply(x)


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def log(x: Tensor) -> Tensor:
    return Log.apply(x)


def sqrt(x: Tensor) -> Tensor:
    return Sqrt.apply(x)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def silu(x: Tensor) -> Tensor:
    return Silu.apply(x)


def softplus(x: Tensor) -> Tensor:
    return Softplus.apply(x)


def clamp_min(x: Tensor, minimum: float) -> Tensor:
    return ClampMin.apply(x, minimum=minimum)
