"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from tensor.tensor import Tensor, no_grad

# Composite blocks contain kinks (single-channel norms, ReLU at 0) where the
# central difference of a zero gradient is O(h) rather than O(h^2).
BLOCK_STEP = 1e-5
BLOCK_ATOL = 1e-5


class GradCheckResult(BaseModel):
    """Outcome of comparing analytic gradients against finite differences."""

    passed: bool = Field(..., description="Whether every checked entry was within tolerance")
    checked: int = Field(..., ge=0, description="Number of scalar entries compared")
    max_abs_error: float = Field(0.0, description="Largest |analytic - numeric|")
    max_rel_error: float = Field(0.0, description="Largest relative error among failing-scale entries")
    worst_entry: str | None = Field(None, description="Tensor index and position of the worst entry")


def _entries(size: int, max_entries: int | None, rng: np.random.Generator) -> np.ndarray:
    if max_entries is None or size <= max_entries:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_entries, replace=False))


def check_gradients(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-4,
    rtol: float = 1e-4,
    atol: float = 1e-6,
    max_entries: int | None = None,
    seed: int = 0,
) -> GradCheckResult:
    """Compare backward() against central differences.

    ``fn`` rebuilds the scalar loss from the current contents of ``tensors`` on
    every call. An entry passes when |a - n| <= atol + rtol * max(|a|, |n|).
    Tensors must be float64.

    Args:
        fn: Zero-argument closure returning a scalar tensor
        tensors: Leaves to differentiate; each must require grad
        h: Finite-difference step
        rtol: Relative tolerance
        atol: Absolute floor
        max_entries: Optional per-tensor cap; entries are sampled without replacement
        seed: Seed for entry sampling

    Returns:
        GradCheckResult summarising the comparison
    """
    for t in tensors:
        if t.dtype != np.float64:
            raise ValueError("Gradient checks run in float64")
        t.zero_grad()

    loss = fn()
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]

    rng = np.random.default_rng(seed)
    checked = 0
    max_abs = 0.0
    max_rel = 0.0
    worst: str | None = None
    passed = True
    with no_grad():
        for ti, t in enumerate(tensors):
            flat = t.data.reshape(-1)
            for position in _entries(flat.size, max_entries, rng):
                original = flat[position]
                flat[position] = original + h
                plus = fn().item()
                flat[position] = original - h
                minus = fn().item()
                flat[position] = original
                numeric = (plus - minus) / (2.0 * h)
                value = float(analytic[ti].reshape(-1)[position])
                abs_err = abs(value - numeric)
                scale = max(abs(value), abs(numeric))
                rel_err = abs_err / scale if scale > 0 else 0.0
                checked += 1
                if abs_err > max_abs:
                    max_abs = abs_err
                    worst = f"tensor {ti} entry {int(position)}"
                if abs_err > atol + rtol * scale:
                    max_rel = max(max_rel, rel_err)
                    passed = False

    for t in tensors:
        t.zero_grad()
    if not passed:
        logger.warning(f"Gradient check failed: max abs {max_abs:.3e}, max rel {max_rel:.3e} at {worst}")
    return GradCheckResult(
        passed=passed,
        checked=checked,
        max_abs_error=max_abs,
        max_rel_error=max_rel,
        worst_entry=worst,
    )
