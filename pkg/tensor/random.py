"""Seeded random streams."""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from tensor.tensor import get_default_dtype


class Rng:
    """Reproducible random stream keyed by a 64-bit seed.

    Stream order: each call advances a single PCG64 stream in call order, and
    array draws fill in C order. Draws are made in float64 and then cast, so a
    float32 run and a float64 run see the same values up to rounding. Network
    construction draws parameters in registration order, which makes a
    (config, seed) pair fix every initial weight.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def spawn(self, key: int) -> Rng:
        """Derive an independent stream for ``key`` without consuming this one."""
        child = Rng.__new__(Rng)
        child.seed = self.seed
        child._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, key])))
        return child

    def normal(self, shape: Sequence[int], std: float = 1.0, dtype: Any = None) -> np.ndarray:
        values = self._generator.standard_normal(tuple(shape)) * std
        return values.astype(dtype or get_default_dtype())

    def uniform(
        self, shape: Sequence[int], low: float = 0.0, high: float = 1.0, dtype: Any = None
    ) -> np.ndarray:
        values = self._generator.uniform(low, high, tuple(shape))
        return values.astype(dtype or get_default_dtype())

    def integers(self, low: int, high: int, size: Sequence[int] | None = None) -> np.ndarray:
        return self._generator.integers(low, high, size=None if size is None else tuple(size))

    def random(self) -> float:
        return float(self._generator.random())

    def state(self) -> dict[str, Any]:
        return self._generator.bit_generator.state

    def set_state(self, state: dict[str, Any]) -> None:
        self._generator.bit_generator.state = state
