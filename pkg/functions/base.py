"""Base interface for differentiable functions."""

from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from tensor.tensor import ShapeError, Tensor, is_grad_enabled


class Function(ABC):
    """Base interface for differentiable functions.

    Each function consists of:
    - A forward pass over raw arrays that saves whatever context backward needs on ``self``
    - A backward pass mapping the output gradient to one gradient per parent
    """

    def __init__(self, *parents: Tensor):
        self.parents = parents

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        """Compute the output array.

        Returns:
            The result of the forward pass
        """
        pass

    @abstractmethod
    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        """Propagate the output gradient.

        Returns:
            One gradient per parent, in parent order; None where no gradient flows
        """
        pass

    @property
    def name(self) -> str:
        """Get the op tag used in graph diagnostics."""
        return type(self).__name__

    @classmethod
    def apply(cls, *parents: Tensor, **kwargs: Any) -> Tensor:
        """Run forward and, when any parent tracks gradients, record the node."""
        fn = cls(*parents)
        out = fn.forward(*(p.data for p in parents), **kwargs)
        requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        dtype = parents[0].dtype if parents else None
        return Tensor(out, requires_grad=requires_grad, dtype=dtype, node=fn if requires_grad else None)


def broadcast_shape(*shapes: tuple[int, ...]) -> tuple[int, ...]:
    """Right-aligned broadcast of ``shapes``; raises ShapeError when incompatible."""
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as e:
        raise ShapeError(f"Shapes {shapes} are not broadcast-compatible") from e


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting expanded to reach ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    axes = tuple(i for i, extent in enumerate(shape) if extent == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad
