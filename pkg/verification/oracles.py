"""Brute-force reference implementations.

Everything here is written with explicit loops and sets over plain numpy
arrays, independent of the tensor core, and is only meant for small inputs.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def loop_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


def loop_conv3d(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray | None = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> np.ndarray:
    batch, cin, *extents = x.shape
    cout, cin_group, kd, kh, kw = w.shape
    out_group = cout // groups
    xp = np.pad(x, ((0, 0), (0, 0)) + ((padding, padding),) * 3)
    od, oh, ow = ((e + 2 * padding - k) // stride + 1 for e, k in zip(extents, (kd, kh, kw)))
    out = np.zeros((batch, cout, od, oh, ow))
    for n, o, z, y, v in itertools.product(range(batch), range(cout), range(od), range(oh), range(ow)):
        g = o // out_group
        total = 0.0 if b is None else float(b[o])
        for c in range(cin_group):
            for i, j, k in itertools.product(range(kd), range(kh), range(kw)):
                total += xp[n, g * cin_group + c, z * stride + i, y * stride + j, v * stride + k] * w[o, c, i, j, k]
        out[n, o, z, y, v] = total
    return out


def loop_transpose_conv3d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int = 2) -> np.ndarray:
    """Kernel == stride: every input voxel paints its own disjoint output block."""
    batch, cin, d, h, wd = x.shape
    _, cout, k, _, _ = w.shape
    out = np.zeros((batch, cout, d * stride, h * stride, wd * stride))
    for n, c, z, y, v in itertools.product(range(batch), range(cin), range(d), range(h), range(wd)):
        for o, i, j, l in itertools.product(range(cout), range(k), range(k), range(k)):
            out[n, o, z * stride + i, y * stride + j, v * stride + l] += x[n, c, z, y, v] * w[c, o, i, j, l]
    if b is not None:
        out += b.reshape(1, -1, 1, 1, 1)
    return out


def sequential_scan(
    u: np.ndarray, delta: np.ndarray, A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray
) -> np.ndarray:
    """Scalar recurrence over (L, d_inner) inputs with (L, d_state) B and C."""
    length, d_inner = u.shape
    d_state = A.shape[1]
    h = np.zeros((d_inner, d_state))
    y = np.zeros((length, d_inner))
    for t in range(length):
        for d in range(d_inner):
            acc = 0.0
            for s in range(d_state):
                h[d, s] = math.exp(delta[t, d] * A[d, s]) * h[d, s] + delta[t, d] * B[t, s] * u[t, d]
                acc += C[t, s] * h[d, s]
            y[t, d] = acc + D[d] * u[t, d]
    return y


def naive_axial_attention(
    x: np.ndarray,
    weights: tuple[np.ndarray, np.ndarray, np.ndarray],
    biases: tuple[np.ndarray, np.ndarray, np.ndarray],
    axis: int,
) -> np.ndarray:
    """Pre-residual attention along ``axis`` of (B, C, L1, L2, L3), one line at a time."""
    wq, wk, wv = weights
    bq, bk, bv = biases
    channels = x.shape[1]
    out = np.zeros_like(x, dtype=np.float64)
    moved = np.moveaxis(x, axis, -1)
    result = np.moveaxis(out, axis, -1)
    for index in itertools.product(*(range(e) for e in (moved.shape[0], *moved.shape[2:4]))):
        n, p, q = index
        tokens = moved[n, :, p, q, :].T.astype(np.float64)
        length = tokens.shape[0]
        qs = [tokens[i] @ wq + bq for i in range(length)]
        ks = [tokens[i] @ wk + bk for i in range(length)]
        vs = [tokens[i] @ wv + bv for i in range(length)]
        for i in range(length):
            scores = [float(qs[i] @ ks[j]) / math.sqrt(channels) for j in range(length)]
            top = max(scores)
            expd = [math.exp(s - top) for s in scores]
            norm = sum(expd)
            row = sum((e / norm) * vs[j] for j, e in enumerate(expd))
            result[n, :, p, q, i] = row
    return out


def chebyshev_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """True where some seed voxel lies within L-infinity distance ``radius``."""
    seeds = np.argwhere(mask)
    out = np.zeros_like(mask, dtype=bool)
    if seeds.size == 0:
        return out
    for voxel in itertools.product(*(range(e) for e in mask.shape)):
        if np.abs(seeds - np.array(voxel)).max(axis=1).min() <= radius:
            out[voxel] = True
    return out


def cosine(x: np.ndarray, y: np.ndarray, eps: float = 1e-8) -> float:
    return float(x @ y) / math.sqrt(max(float(x @ x) * float(y @ y), eps * eps))


def brute_fr_terms(
    features: np.ndarray,
    label: np.ndarray,
    boundary_iterations: int,
    negative_iterations: int,
    num_hard_negatives: int,
    eps: float = 1e-8,
) -> dict[str, float] | None:
    """The three feature-loss terms of one sample from explicit voxel sets; None without foreground."""
    shape = label.shape
    voxels = list(itertools.product(*(range(e) for e in shape)))
    pos = {v for v in voxels if label[v]}
    neg = set(voxels) - pos
    if not pos:
        return None

    def feature(v: tuple[int, ...]) -> np.ndarray:
        return features[(slice(None), *v)].astype(np.float64)

    center = sum(feature(v) for v in sorted(pos)) / len(pos)
    l_pos = sum(1.0 - cosine(feature(v), center, eps) for v in pos) / len(pos)

    def grow(seeds: set[tuple[int, ...]], radius: int) -> set[tuple[int, ...]]:
        mask = np.zeros(shape, dtype=bool)
        for v in seeds:
            mask[v] = True
        return {tuple(int(i) for i in v) for v in np.argwhere(chebyshev_dilate(mask, radius))}

    boundary = grow(pos, boundary_iterations) & neg
    l_boundary = (
        sum(max(cosine(feature(v), center, eps), 0.0) for v in boundary) / len(boundary) if boundary else 0.0
    )

    ranked = sorted(neg, key=lambda v: (-cosine(feature(v), center, eps), np.ravel_multi_index(v, shape)))
    seeds = set(ranked[:num_hard_negatives])
    hard = grow(seeds, negative_iterations) & neg
    l_neg = sum(max(cosine(feature(v), center, eps), 0.0) for v in hard) / len(hard) if hard else 0.0
    return {"l_pos": l_pos, "l_boundary": l_boundary, "l_neg": l_neg}


def loop_confusion(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int, int]:
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn
