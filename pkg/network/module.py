"""Parameter container base for network blocks."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Iterator

import numpy as np

from tensor.tensor import ShapeError, Tensor

Shape = tuple[int, ...]


class Parameter(Tensor):
    """A learnable leaf tensor."""

    def __init__(self, data: np.ndarray):
        super().__init__(data, requires_grad=True)


class Module(ABC):
    """Base interface for network blocks.

    Each block consists of:
    - Parameters and sub-blocks stored as attributes; registration order is
      attribute assignment order, which fixes the parameter layout
    - A forward pass over tensors
    - An analytic FLOP count for a given input shape
    """

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    @abstractmethod
    def forward(self, *args: Any, **kwargs: Any) -> Any:
        pass

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        """Analytic FLOPs for an input of ``shape`` plus the output shape."""
        raise NotImplementedError(f"{type(self).__name__} has no FLOP model")

    def named_children(self) -> Iterator[tuple[str, Module]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{name}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        """Ordered parameter store: name -> array copy."""
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = params.keys() - state.keys()
        unexpected = state.keys() - params.keys()
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise ShapeError(f"{name}: stored {state[name].shape}, expected {p.shape}")
            p.data = np.ascontiguousarray(state[name], dtype=p.dtype)
