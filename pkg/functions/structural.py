"""Shape-changing ops: reshape, permute, concat/split, gather, reductions.

All of these are linear; each backward is the matching scatter or gather.
Permutes materialize a contiguous copy.
"""

from typing import Any, Sequence

import numpy as np

from functions.base import Function
from tensor.tensor import ShapeError, Tensor


def _normalize_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for {ndim}-D tensor")
    return axis % ndim


class Reshape(Function):
    def forward(self, x: np.ndarray, shape: tuple[int, ...] = ()) -> np.ndarray:
        self.in_shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError as e:
            raise ShapeError(f"Cannot reshape {x.shape} to {shape}") from e

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.in_shape),)


class Permute(Function):
    def forward(self, x: np.ndarray, axes: tuple[int, ...] = ()) -> np.ndarray:
        if sorted(axes) != list(range(x.ndim)):
            raise ShapeError(f"{axes} is not a permutation of {x.ndim} axes")
        self.inverse = tuple(int(i) for i in np.argsort(axes))
        return np.ascontiguousarray(np.transpose(x, axes))

    def backward(self, grad: np.ndarray):
        return (np.ascontiguousarray(np.transpose(grad, self.inverse)),)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        axis = _normalize_axis(axis, arrays[0].ndim)
        for a in arrays[1:]:
            if a.ndim != arrays[0].ndim or any(
                a.shape[i] != arrays[0].shape[i] for i in range(a.ndim) if i != axis
            ):
                raise ShapeError(f"Cannot concat {[x.shape for x in arrays]} along axis {axis}")
        self.axis = axis
        self.bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad: np.ndarray):
        return tuple(np.split(grad, self.bounds, axis=self.axis))


class Index(Function):
    def forward(self, x: np.ndarray, key: Any = None) -> np.ndarray:
        self.in_shape = x.shape
        self.key = key
        return np.array(x[key], copy=True)

    def backward(self, grad: np.ndarray):
        out = np.zeros(self.in_shape, dtype=grad.dtype)
        np.add.at(out, self.key, grad)
        return (out,)


class Take(Function):
    def forward(self, x: np.ndarray, indices: np.ndarray | None = None, axis: int = 0) -> np.ndarray:
        assert indices is not None
        axis = _normalize_axis(axis, x.ndim)
        if indices.size and (indices.min() < -x.shape[axis] or indices.max() >= x.shape[axis]):
            raise ShapeError(f"indices out of range for axis {axis} of extent {x.shape[axis]}")
        self.in_shape, self.indices, self.axis = x.shape, indices, axis
        return np.take(x, indices, axis=axis)

    def backward(self, grad: np.ndarray):
        out = np.zeros(self.in_shape, dtype=grad.dtype)
        moved = np.moveaxis(out, self.axis, 0)
        np.add.at(moved, self.indices, np.moveaxis(grad, self.axis, 0))
        return (out,)


class Sum(Function):
    def forward(
        self, x: np.ndarray, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> np.ndarray:
        self.in_shape = x.shape
        self.axes = (
            tuple(range(x.ndim))
            if axis is None
            else tuple(_normalize_axis(a, x.ndim) for a in np.atleast_1d(axis))
        )
        self.keepdims = keepdims
        return np.asarray(np.sum(x, axis=self.axes, keepdims=keepdims))

    def backward(self, grad: np.ndarray):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, self.in_shape).copy(),)


class Mean(Sum):
    def forward(
        self, x: np.ndarray, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> np.ndarray:
        total = super().forward(x, axis=axis, keepdims=keepdims)
        self.count = int(np.prod([x.shape[a] for a in self.axes]))
        return total / self.count

    def backward(self, grad: np.ndarray):
        (g,) = super().backward(grad)
        return (g / self.count,)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Reshape.apply(x, shape=shape)


def permute(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    return Permute.apply(x, axes=tuple(axes))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if len(tensors) == 1:
        return tensors[0]
    return Concat.apply(*tensors, axis=axis)


def slice_axis(x: Tensor, start: int, stop: int, axis: int) -> Tensor:
    axis = _normalize_axis(axis, x.ndim)
    key = (slice(None),) * axis + (slice(start, stop),)
    return Index.apply(x, key=key)


def split(x: Tensor, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    """Split into consecutive pieces of the given extents along ``axis``."""
    axis = _normalize_axis(axis, x.ndim)
    if sum(sizes) != x.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover extent {x.shape[axis]}")
    pieces = []
    start = 0
    for size in sizes:
        pieces.append(slice_axis(x, start, start + size, axis))
        start += size
    return pieces


def index(x: Tensor, key: Any) -> Tensor:
    return Index.apply(x, key=key)


def take(x: Tensor, indices: np.ndarray, axis: int = 0) -> Tensor:
    return Take.apply(x, indices=np.asarray(indices, dtype=np.intp), axis=axis)


def reduce_sum(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def reduce_mean(
    x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> Tensor:
    return Mean.apply(x, axis=axis, keepdims=keepdims)
