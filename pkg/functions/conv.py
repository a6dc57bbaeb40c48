"""Volumetric convolution, transpose convolution and average pooling.

Convolutions gather one kernel offset at a time: the output is a sum over
offsets of a strided window of the padded input contracted with that offset's
weight slice. Backward scatters the same way, so forward and backward share
one indexing scheme.
"""

from itertools import product

import numpy as np

from functions.base import Function
from tensor.tensor import ShapeError, Tensor

Triple = tuple[int, int, int]


def _triple(value: int | Triple) -> Triple:
    if isinstance(value, int):
        return (value, value, value)
    return (int(value[0]), int(value[1]), int(value[2]))


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    """floor((in + 2*pad - k) / stride) + 1"""
    return (extent + 2 * padding - kernel) // stride + 1


class Conv3d(Function):
    def forward(
        self,
        x: np.ndarray,
        w: np.ndarray,
        b: np.ndarray | None = None,
        stride: Triple = (1, 1, 1),
        padding: Triple = (0, 0, 0),
        groups: int = 1,
    ) -> np.ndarray:
        if x.ndim != 5 or w.ndim != 5:
            raise ShapeError(f"conv3d expects 5-D input and weight, got {x.shape}, {w.shape}")
        batch, cin = x.shape[:2]
        cout, cin_group = w.shape[:2]
        kernel = w.shape[2:]
        if cin % groups or cout % groups or cin_group != cin // groups:
            raise ShapeError(
                f"conv3d channel mismatch: input {cin}, weight {w.shape[:2]}, groups {groups}"
            )
        if b is not None and b.shape != (cout,):
            raise ShapeError(f"conv3d bias must have shape ({cout},), got {b.shape}")
        out_extents = tuple(
            conv_output_extent(x.shape[2 + i], kernel[i], stride[i], padding[i]) for i in range(3)
        )
        if any(e <= 0 for e in out_extents):
            raise ShapeError(f"conv3d output extents {out_extents} are not positive")

        pad = ((0, 0), (0, 0)) + tuple((p, p) for p in padding)
        xp = np.pad(x, pad) if any(padding) else x
        xg = xp.reshape(batch, groups, cin_group, *xp.shape[2:])
        wg = w.reshape(groups, cout // groups, cin_group, *kernel)

        out = np.zeros((batch, groups, cout // groups) + out_extents, dtype=x.dtype)
        for offset in product(*(range(k) for k in kernel)):
            window = xg[(Ellipsis,) + self._window(offset, out_extents, stride)]
            out += np.einsum("bgcdhw,goc->bgodhw", window, wg[..., offset[0], offset[1], offset[2]], optimize=True)
        out = out.reshape(batch, cout, *out_extents)
        if b is not None:
            out += b.reshape(1, -1, 1, 1, 1)

        self.xg, self.wg = xg, wg
        self.x_shape, self.w_shape, self.padded_shape = x.shape, w.shape, xp.shape
        self.stride, self.padding, self.groups = stride, padding, groups
        self.out_extents, self.has_bias = out_extents, b is not None
        return out

    @staticmethod
    def _window(offset: Triple, out_extents: tuple[int, ...], stride: Triple) -> tuple[slice, ...]:
        return tuple(
            slice(offset[i], offset[i] + stride[i] * (out_extents[i] - 1) + 1, stride[i])
            for i in range(3)
        )

    def backward(self, grad: np.ndarray):
        batch = grad.shape[0]
        groups = self.groups
        g = grad.reshape(batch, groups, -1, *self.out_extents)
        gxg = np.zeros(self.xg.shape, dtype=grad.dtype)
        gwg = np.zeros(self.wg.shape, dtype=grad.dtype)
        kernel = self.w_shape[2:]
        for offset in product(*(range(k) for k in kernel)):
            key = (Ellipsis,) + self._window(offset, self.out_extents, self.stride)
            gwg[..., offset[0], offset[1], offset[2]] = np.einsum(
                "bgodhw,bgcdhw->goc", g, self.xg[key], optimize=True
            )
            gxg[key] += np.einsum(
                "bgodhw,goc->bgcdhw", g, self.wg[..., offset[0], offset[1], offset[2]], optimize=True
            )
        gx = gxg.reshape(self.padded_shape)
        pd, ph, pw = self.padding
        d, h, w = self.x_shape[2:]
        gx = np.ascontiguousarray(gx[:, :, pd : pd + d, ph : ph + h, pw : pw + w])
        gw = gwg.reshape(self.w_shape)
        gb = grad.sum(axis=(0, 2, 3, 4)) if self.has_bias else None
        return (gx, gw, gb) if self.has_bias else (gx, gw)


class ConvTranspose3d(Function):
    """Transpose convolution with kernel equal to stride (non-overlapping tiles).

    Weight layout is (in_channels, out_channels, kd, kh, kw), so the same array
    used as a stride-k conv3d weight (out=in_t, in=out_t) gives the adjoint.
    """

    def forward(self, x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
        if x.ndim != 5 or w.ndim != 5 or x.shape[1] != w.shape[0]:
            raise ShapeError(f"transpose_conv3d mismatch: input {x.shape}, weight {w.shape}")
        batch = x.shape[0]
        cout = w.shape[1]
        kernel = w.shape[2:]
        out_extents = tuple(x.shape[2 + i] * kernel[i] for i in range(3))
        out = np.zeros((batch, cout) + out_extents, dtype=x.dtype)
        for i, j, k in product(*(range(e) for e in kernel)):
            out[:, :, i :: kernel[0], j :: kernel[1], k :: kernel[2]] = np.einsum(
                "bcdhw,co->bodhw", x, w[:, :, i, j, k], optimize=True
            )
        if b is not None:
            out += b.reshape(1, -1, 1, 1, 1)
        self.x, self.w, self.has_bias = x, w, b is not None
        return out

    def backward(self, grad: np.ndarray):
        kernel = self.w.shape[2:]
        gx = np.zeros_like(self.x)
        gw = np.zeros_like(self.w)
        for i, j, k in product(*(range(e) for e in kernel)):
            tile = grad[:, :, i :: kernel[0], j :: kernel[1], k :: kernel[2]]
            gx += np.einsum("bodhw,co->bcdhw", tile, self.w[:, :, i, j, k], optimize=True)
            gw[:, :, i, j, k] = np.einsum("bcdhw,bodhw->co", self.x, tile, optimize=True)
        if self.has_bias:
            return gx, gw, grad.sum(axis=(0, 2, 3, 4))
        return gx, gw


class AvgPool3d(Function):
    def forward(self, x: np.ndarray, kernel: int = 2) -> np.ndarray:
        batch, channels, d, h, w = x.shape
        if d % kernel or h % kernel or w % kernel:
            raise ShapeError(f"avg_pool3d needs extents divisible by {kernel}, got {x.shape[2:]}")
        self.kernel = kernel
        blocks = x.reshape(batch, channels, d // kernel, kernel, h // kernel, kernel, w // kernel, kernel)
        return blocks.mean(axis=(3, 5, 7))

    def backward(self, grad: np.ndarray):
        k = self.kernel
        spread = grad.repeat(k, axis=2).repeat(k, axis=3).repeat(k, axis=4)
        return (spread / (k**3),)


def conv3d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int | Triple = 1,
    padding: int | Triple = 0,
    groups: int = 1,
) -> Tensor:
    parents = (x, weight) if bias is None else (x, weight, bias)
    return Conv3d.apply(*parents, stride=_triple(stride), padding=_triple(padding), groups=groups)


def transpose_conv3d(
    x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int | Triple = 2
) -> Tensor:
    if tuple(weight.shape[2:]) != _triple(stride):
        raise ShapeError(f"transpose_conv3d supports kernel == stride, got {weight.shape[2:]} vs {stride}")
    parents = (x, weight) if bias is None else (x, weight, bias)
    return ConvTranspose3d.apply(*parents)


def avg_pool3d(x: Tensor, kernel: int = 2) -> Tensor:
    return AvgPool3d.apply(x, kernel=kernel)
