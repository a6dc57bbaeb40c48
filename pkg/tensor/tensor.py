"""Dense N-D tensor with reverse-mode automatic differentiation."""

from __future__ import annotations

from contextlib import contextmanager
from typing import TYPE_CHECKING, Any, Iterator, Sequence

import numpy as np
from loguru import logger

if TYPE_CHECKING:
    from functions.base import Function

_default_dtype: np.dtype = np.dtype(np.float32)
_grad_enabled = True


class ShapeError(ValueError):
    """Raised when tensor extents are incompatible with an operation."""


class GradError(RuntimeError):
    """Raised when a backward pass cannot be started."""


def set_default_dtype(dtype: Any) -> None:
    """Set the element type used for new tensors and parameters (float32 or float64)."""
    global _default_dtype
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported element type: {resolved}")
    _default_dtype = resolved


def get_default_dtype() -> np.dtype:
    return _default_dtype


@contextmanager
def default_dtype(dtype: Any) -> Iterator[None]:
    """Temporarily switch the default element type."""
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense array plus the bookkeeping reverse-mode autodiff needs.

    Data is always a contiguous row-major numpy array. A tensor produced by a
    graph op keeps a backref (``node``) to the `Function` that created it; the
    function records its parents exactly once, so the graph is the set of nodes
    reachable from a root through those backrefs.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        dtype: Any = None,
        node: Function | None = None,
    ):
        """Initialize a tensor.

        Args:
            data: Array-like payload. Float arrays keep their dtype unless ``dtype``
                is given; anything else is converted to the default element type.
            requires_grad: Whether gradients should be accumulated for this tensor
            dtype: Explicit element type
            node: The function that produced this tensor, None for leaves
        """
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
                dtype = data.dtype
            else:
                dtype = _default_dtype
        array = np.asarray(data, dtype=dtype, order="C")
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError(f"Tensor extents must be positive, got {array.shape}")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node = node

    # -- metadata -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def __repr__(self) -> str:
        grad_note = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{grad_note})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        """Return a tensor sharing data but cut from the graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    # -- autodiff -----------------------------------------------------------

    def _topological_order(self) -> list[Tensor]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor.node is not None:
                for parent in reversed(tensor.node.parents):
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``grad`` of every requires_grad leaf.

        The root must be a scalar. Leaf gradients accumulate across calls until
        `zero_grad` is called.
        """
        if not self.requires_grad:
            raise GradError("backward() called on a tensor that does not require grad")
        if self.data.size != 1:
            raise GradError(f"backward() requires a scalar root, got shape {self.shape}")

        order = self._topological_order()
        logger.debug(f"Backward over {len(order)} graph nodes")

        pending: dict[int, np.ndarray] = {
            id(self): np.ones_like(self.data) if grad is None else np.asarray(grad, self.dtype)
        }
        for tensor in reversed(order):
            upstream = pending.pop(id(tensor), None)
            if upstream is None:
                continue
            if tensor.node is None:
                tensor.grad = upstream.copy() if tensor.grad is None else tensor.grad + upstream
                continue
            parent_grads = tensor.node.backward(upstream)
            for parent, parent_grad in zip(tensor.node.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = np.asarray(parent_grad, dtype=parent.dtype)
                if parent_grad.shape != parent.shape:
                    raise ShapeError(
                        f"{tensor.node.name} produced grad {parent_grad.shape} "
                        f"for parent {parent.shape}"
                    )
                key = id(parent)
                pending[key] = pending[key] + parent_grad if key in pending else parent_grad

    # -- operator sugar -----------------------------------------------------

    def _lift(self, other: Any) -> Tensor:
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.add(self, self._lift(other))

    def __radd__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.add(self._lift(other), self)

    def __sub__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.sub(self, self._lift(other))

    def __rsub__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.sub(self._lift(other), self)

    def __mul__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.mul(self, self._lift(other))

    def __rmul__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.mul(self._lift(other), self)

    def __truediv__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.div(self, self._lift(other))

    def __rtruediv__(self, other: Any) -> Tensor:
        from functions import elementwise

        return elementwise.div(self._lift(other), self)

    def __neg__(self) -> Tensor:
        from functions import elementwise

        return elementwise.neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        from functions import linalg

        return linalg.matmul(self, other)

    def __getitem__(self, key: Any) -> Tensor:
        from functions import structural

        return structural.index(self, key)

    # -- method forms -------------------------------------------------------

    def reshape(self, *shape: int | Sequence[int]) -> Tensor:
        from functions import structural

        if len(shape) == 1 and not isinstance(shape[0], int):
            shape = tuple(shape[0])
        return structural.reshape(self, tuple(shape))  # type: ignore[arg-type]

    def permute(self, *axes: int | Sequence[int]) -> Tensor:
        from functions import structural

        if len(axes) == 1 and not isinstance(axes[0], int):
            axes = tuple(axes[0])
        return structural.permute(self, tuple(axes))  # type: ignore[arg-type]

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from functions import structural

        return structural.reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from functions import structural

        return structural.reduce_mean(self, axis=axis, keepdims=keepdims)

    def exp(self) -> Tensor:
        from functions import elementwise

        return elementwise.exp(self)

    def log(self) -> Tensor:
        from functions import elementwise

        return elementwise.log(self)

    def sqrt(self) -> Tensor:
        from functions import elementwise

        return elementwise.sqrt(self)

    def relu(self) -> Tensor:
        from functions import elementwise

        return elementwise.relu(self)

    def silu(self) -> Tensor:
        from functions import elementwise

        return elementwise.silu(self)

    def sigmoid(self) -> Tensor:
        from functions import elementwise

        return elementwise.sigmoid(self)

    def softplus(self) -> Tensor:
        from functions import elementwise

        return elementwise.softplus(self)


def zeros(shape: Sequence[int], requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=_default_dtype), requires_grad=requires_grad)


def ones(shape: Sequence[int], requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(tuple(shape), dtype=_default_dtype), requires_grad=requires_grad)
