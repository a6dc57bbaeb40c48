"""Tensor core: dense arrays, the autodiff graph, seeded randomness."""

from tensor.random import Rng
from tensor.tensor import (
    GradError,
    ShapeError,
    Tensor,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    ones,
    set_default_dtype,
    zeros,
)

__all__ = [
    "GradError",
    "Rng",
    "ShapeError",
    "Tensor",
    "default_dtype",
    "get_default_dtype",
    "is_grad_enabled",
    "no_grad",
    "ones",
    "set_default_dtype",
    "zeros",
]
