"""Selective state-space scan as a single differentiable op.

Recurrence per channel d and state slot s:

    h_t = exp(delta_t * A) * h_{t-1} + (delta_t * B_t) * u_t,   h_0 = 0
    y_t = <C_t, h_t> + D * u_t

The forward loop runs sequentially over time and is vectorised over a batch of
independent sequences; backward runs the adjoint recurrence in reverse time.
"""

import numpy as np

from functions.base import Function
from tensor.tensor import ShapeError, Tensor


def discretize(
    A: np.ndarray, B_t: np.ndarray, delta_t: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order hold for A, Euler for B.

    Args:
        A: (d_inner, d_state) continuous transition, strictly negative
        B_t: (..., d_state) input map at step t
        delta_t: (..., d_inner) positive step sizes

    Returns:
        (A_bar, B_bar), both (..., d_inner, d_state)
    """
    A_bar = np.exp(delta_t[..., None] * A)
    B_bar = delta_t[..., None] * B_t[..., None, :]
    return A_bar, B_bar


class SelectiveScan(Function):
    def forward(
        self,
        u: np.ndarray,
        delta: np.ndarray,
        A: np.ndarray,
        B: np.ndarray,
        C: np.ndarray,
        D: np.ndarray,
    ) -> np.ndarray:
        if u.ndim != 3:
            raise ShapeError(f"selective_scan expects (batch, seq_len, d_inner), got {u.shape}")
        n, length, d_inner = u.shape
        d_state = A.shape[1]
        if length < 1:
            raise ShapeError("selective_scan needs a non-empty sequence")
        if (
            delta.shape != u.shape
            or A.shape != (d_inner, d_state)
            or B.shape != (n, length, d_state)
            or C.shape != (n, length, d_state)
            or D.shape != (d_inner,)
        ):
            raise ShapeError(
                "selective_scan operand mismatch: "
                f"u {u.shape}, delta {delta.shape}, A {A.shape}, B {B.shape}, C {C.shape}, D {D.shape}"
            )

        A_bar, B_bar = discretize(A, B, delta)
        drive = B_bar * u[..., None]
        states = np.empty_like(A_bar)
        h = np.zeros((n, d_inner, d_state), dtype=u.dtype)
        for t in range(length):
            h = A_bar[:, t] * h + drive[:, t]
            states[:, t] = h
        y = np.einsum("nlds,nls->nld", states, C) + u * D

        self.u, self.delta, self.A, self.B, self.C, self.D = u, delta, A, B, C, D
        self.A_bar, self.B_bar, self.states = A_bar, B_bar, states
        return y

    def backward(self, grad: np.ndarray):
        u, delta, A, B, C, D = self.u, self.delta, self.A, self.B, self.C, self.D
        A_bar, B_bar, states = self.A_bar, self.B_bar, self.states
        length = u.shape[1]

        g_A_bar = np.zeros_like(A_bar)
        g_drive = np.empty_like(A_bar)
        g_h = np.zeros_like(states[:, 0])
        for t in reversed(range(length)):
            g_h = g_h + grad[:, t, :, None] * C[:, t, None, :]
            g_drive[:, t] = g_h
            if t > 0:
                g_A_bar[:, t] = g_h * states[:, t - 1]
            g_h = g_h * A_bar[:, t]

        g_C = np.einsum("nld,nlds->nls", grad, states)
        g_exponent = g_A_bar * A_bar
        g_delta = np.einsum("nlds,ds->nld", g_exponent, A) + np.einsum(
            "nlds,nls->nld", g_drive, B
        ) * u
        g_A = np.einsum("nlds,nld->ds", g_exponent, delta)
        g_B = np.einsum("nlds,nld->nls", g_drive, delta * u)
        g_u = np.einsum("nlds,nlds->nld", g_drive, B_bar) + grad * D
        g_D = (grad * u).sum(axis=(0, 1))
        return g_u, g_delta, g_A, g_B, g_C, g_D


def selective_scan(
    u: Tensor, delta: Tensor, A: Tensor, B: Tensor, C: Tensor, D: Tensor
) -> Tensor:
    """Run the selective scan over (batch, seq_len, d_inner) sequences."""
    return SelectiveScan.apply(u, delta, A, B, C, D)
