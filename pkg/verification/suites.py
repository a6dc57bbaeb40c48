"""Verification suites: each compares the implementation against an oracle or invariant.

A suite takes a case count and a seed and returns a SuiteResult; ``run_suites``
runs a selection with either the full acceptance counts or quick counts.
"""

from __future__ import annotations

import time
from typing import Callable, Literal

import numpy as np
from loguru import logger

import functions as F
from losses.morphology import dilate
from losses.region import (
    boundary_loss,
    foreground_center,
    hard_negative_loss,
    positive_compactness,
)
from losses.total import fr_loss, total_loss
from metrics.evaluation import confusion_counts, evaluate
from models.config import AttentionConfig, LossConfig, MismConfig, NetworkConfig, ScanConfig
from models.reports import SuiteResult
from models.volume import VoxelMask
from network import accounting
from network.attention import AxialSelfAttention
from network.blocks import ConvBlock, DenseBlock, HCMAUp, OutBlock, ResBlock
from network.layers import Conv3d
from network.mism import MISM
from network.module import Module
from network.ssm import VSSB, Mamba3d, cross_merge, cross_scan
from network.unet import build
from tensor.gradcheck import BLOCK_ATOL, BLOCK_STEP, check_gradients
from tensor.random import Rng
from tensor.tensor import Tensor, default_dtype, no_grad
from verification import oracles

Scale = Literal["full", "quick"]
GradCase = Callable[[], tuple[Callable[[], Tensor], list[Tensor]]]


class _Tally:
    def __init__(self, name: str):
        self.name = name
        self.cases = 0
        self.failures: list[str] = []
        self.max_error = 0.0

    def close(self, label: str, actual: np.ndarray | float, expected: np.ndarray | float, tol: float) -> None:
        self.cases += 1
        error = float(np.max(np.abs(np.asarray(actual, dtype=np.float64) - np.asarray(expected))))
        self.max_error = max(self.max_error, error)
        if not error <= tol:
            self.failures.append(f"{label}: error {error:.3e} > {tol:.0e}")

    def check(self, label: str, ok: bool) -> None:
        self.cases += 1
        if not ok:
            self.failures.append(label)

    def result(self) -> SuiteResult:
        return SuiteResult(name=self.name, cases=self.cases, failures=self.failures, max_error=self.max_error)


def _leaf(rng: np.random.Generator, *shape: int, low: float | None = None) -> Tensor:
    data = rng.uniform(low, 2.0, size=shape) if low is not None else rng.standard_normal(shape)
    return Tensor(data.astype(np.float64), requires_grad=True)



# -- gradients ---------------------------------------------------------------


def _op_cases(rng: np.random.Generator) -> dict[str, GradCase]:
    def binary(op: Callable[[Tensor, Tensor], Tensor], positive: bool = False):
        def make():
            a = _leaf(rng, 2, 3)
            b = _leaf(rng, 3, low=0.5) if positive else _leaf(rng, 3)
            w = Tensor(rng.standard_normal((2, 3)))
            return (lambda: (op(a, b) * w).sum()), [a, b]

        return make

    def unary(op: Callable[[Tensor], Tensor], positive: bool = False):
        def make():
            x = _leaf(rng, 2, 4, low=0.5) if positive else _leaf(rng, 2, 4)
            w = Tensor(rng.standard_normal((2, 4)))
            return (lambda: (op(x) * w).sum()), [x]

        return make

    def matmul():
        a, b = _leaf(rng, 2, 3, 4), _leaf(rng, 4, 2)
        w = Tensor(rng.standard_normal((2, 3, 2)))
        return (lambda: (F.matmul(a, b) * w).sum()), [a, b]

    def conv():
        groups = int(rng.choice([1, 2]))
        x, wt, b = _leaf(rng, 1, 2, 4, 4, 4), _leaf(rng, 4, 2 // groups, 3, 3, 3), _leaf(rng, 4)
        stride = int(rng.choice([1, 2]))
        w = Tensor(rng.standard_normal(F.conv3d(x, wt, b, stride, 1, groups).shape))
        return (lambda: (F.conv3d(x, wt, b, stride, 1, groups) * w).sum()), [x, wt, b]

    def transpose_conv():
        x, wt, b = _leaf(rng, 1, 3, 2, 2, 2), _leaf(rng, 3, 2, 2, 2, 2), _leaf(rng, 2)
        w = Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
        return (lambda: (F.transpose_conv3d(x, wt, b) * w).sum()), [x, wt, b]

    def pool():
        x = _leaf(rng, 1, 2, 4, 4, 2)
        w = Tensor(rng.standard_normal((1, 2, 2, 2, 1)))
        return (lambda: (F.avg_pool3d(x) * w).sum()), [x]

    def inorm():
        x = _leaf(rng, 2, 2, 3, 2, 2)
        w = Tensor(rng.standard_normal(x.shape))
        return (lambda: (F.instance_norm(x) * w).sum()), [x]

    def lnorm():
        x = _leaf(rng, 3, 5)
        w = Tensor(rng.standard_normal(x.shape))
        return (lambda: (F.layer_norm(x, (5,)) * w).sum()), [x]

    def structural():
        a, b = _leaf(rng, 2, 3, 2), _leaf(rng, 2, 1, 2)
        idx = rng.integers(0, 4, size=5)
        w = Tensor(rng.standard_normal((5, 2, 2)))

        def loss():
            joined = F.concat([a, b], axis=1).permute(1, 0, 2)
            return (F.take(joined, idx, axis=0) * w).sum() + F.split(joined, [1, 3], axis=0)[1].mean()

        return loss, [a, b]

    def scan():
        n, length, d_inner, d_state = 2, int(rng.integers(1, 6)), 3, 2
        u = _leaf(rng, n, length, d_inner)
        B, C = _leaf(rng, n, length, d_state), _leaf(rng, n, length, d_state)
        delta = _leaf(rng, n, length, d_inner, low=0.1)
        A = Tensor(-rng.uniform(0.5, 2.0, (d_inner, d_state)), requires_grad=True)
        D = _leaf(rng, d_inner)
        w = Tensor(rng.standard_normal(u.shape))
        return (lambda: (F.selective_scan(u, delta, A, B, C, D) * w).sum()), [u, delta, A, B, C, D]

    return {
        "add": binary(F.add),
        "sub": binary(F.sub),
        "mul": binary(F.mul),
        "div": binary(F.div, positive=True),
        "exp": unary(F.exp),
        "log": unary(F.log, positive=True),
        "sqrt": unary(F.sqrt, positive=True),
        "relu": unary(F.relu),
        "sigmoid": unary(F.sigmoid),
        "silu": unary(F.silu),
        "softplus": unary(F.softplus),
        "softmax": unary(lambda x: F.softmax(x, axis=-1)),
        "log_softmax": unary(lambda x: F.log_softmax(x, axis=-1)),
        "matmul": matmul,
        "conv3d": conv,
        "transpose_conv3d": transpose_conv,
        "avg_pool3d": pool,
        "instance_norm": inorm,
        "layer_norm": lnorm,
        "structural": structural,
        "selective_scan": scan,
    }


def _block_cases(rng: np.random.Generator) -> dict[str, GradCase]:
    scan_cfg = ScanConfig(d_state=2, expansion=2)

    def block(module_factory: Callable[[Rng], Module], *shapes: tuple[int, ...]) -> GradCase:
        def make():
            module = module_factory(Rng(int(rng.integers(1 << 31))))
            inputs = [_leaf(rng, *shape) for shape in shapes]
            w = Tensor(rng.standard_normal(module(*inputs).shape))
            return (lambda: (module(*inputs) * w).sum()), [*inputs, *module.parameters()]

        return make

    def network_and_loss():
        config = NetworkConfig(
            stage_widths=[4, 4], mism_stages=[2], mism=MismConfig(scan=ScanConfig(d_state=2, expansion=1))
        )
        model = build(config, seed=int(rng.integers(1 << 31)))
        x = _leaf(rng, 1, 1, 4, 4, 4)
        labels = np.zeros((1, 4, 4, 4), dtype=bool)
        labels[0, 1:3, 1:3, 1:3] = True
        loss_cfg = LossConfig(boundary_iterations=1, negative_iterations=1, num_hard_negatives=3)

        def loss():
            logits, features = model(x)
            return total_loss(logits, features, labels, loss_cfg)

        return loss, [x, *model.parameters()]

    return {
        "conv_block": block(lambda r: ConvBlock(2, 3, r), (1, 2, 3, 3, 3)),
        "res_block": block(lambda r: ResBlock(2, r), (1, 2, 4, 4, 4)),
        "dense_block": block(lambda r: DenseBlock(2, 4, r), (1, 2, 3, 3, 3)),
        "hcma_up": block(lambda r: HCMAUp(4, 2, r), (1, 4, 2, 2, 2), (1, 2, 4, 4, 4)),
        "out_block": block(lambda r: OutBlock(3, 2, r), (1, 3, 2, 2, 2)),
        "vssb": block(lambda r: VSSB(4, scan_cfg, r), (2, 4, 3, 5)),
        "asa": block(lambda r: AxialSelfAttention(2, AttentionConfig(), r), (1, 2, 2, 2, 3)),
        "mism": block(lambda r: MISM(4, MismConfig(scan=scan_cfg), r), (1, 4, 2, 3, 2)),
        "mamba3d": block(lambda r: Mamba3d(2, scan_cfg, r), (1, 2, 2, 2, 3)),
        "network_total_loss": network_and_loss,
    }


def gradients(cases: int, seed: int = 0, max_entries: int = 8) -> SuiteResult:
    """Central differences against backward() for every op and block."""
    tally = _Tally("gradients")
    rng = np.random.default_rng(seed)
    block_cases = max(1, cases // 10)
    with default_dtype(np.float64):
        ops, blocks = _op_cases(rng), _block_cases(rng)
        for table, count in ((ops, cases), (blocks, block_cases)):
            for name, make in table.items():
                for i in range(count):
                    fn, tensors = make()
                    tolerance = {"h": BLOCK_STEP, "atol": BLOCK_ATOL} if table is blocks else {}
                    result = check_gradients(fn, tensors, max_entries=max_entries, seed=seed + i, **tolerance)
                    tally.max_error = max(tally.max_error, result.max_abs_error)
                    tally.check(f"{name}[{i}] {result.worst_entry} rel {result.max_rel_error:.2e}", result.passed)
    return tally.result()


# -- kernel oracles ------------------------------------------------------------


def kernels(cases: int, seed: int = 0) -> SuiteResult:
    """Matmul and convolutions against loop oracles; transpose conv adjoint identity."""
    tally = _Tally("kernels")
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64), no_grad():
        for i in range(cases):
            a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
            tally.close(f"matmul[{i}]", F.matmul(Tensor(a), Tensor(b)).data, oracles.loop_matmul(a, b), 1e-12)

            groups = int(rng.choice([1, 2]))
            stride, padding = int(rng.choice([1, 2])), int(rng.choice([0, 1]))
            x = rng.standard_normal((1, 2, 4, 4, 4))
            w, bias = rng.standard_normal((2, 2 // groups, 3, 3, 3)), rng.standard_normal(2)
            got = F.conv3d(Tensor(x), Tensor(w), Tensor(bias), stride, padding, groups).data
            tally.close(f"conv3d[{i}]", got, oracles.loop_conv3d(x, w, bias, stride, padding, groups), 1e-10)

            xt, wt = rng.standard_normal((1, 3, 2, 2, 2)), rng.standard_normal((3, 2, 2, 2, 2))
            y = rng.standard_normal((1, 2, 4, 4, 4))
            up = F.transpose_conv3d(Tensor(xt), Tensor(wt)).data
            tally.close(f"transpose_conv3d[{i}]", up, oracles.loop_transpose_conv3d(xt, wt, None), 1e-10)
            down = F.conv3d(Tensor(y), Tensor(wt), stride=2).data
            tally.close(f"adjoint[{i}]", float((up * y).sum()), float((xt * down).sum()), 1e-10)
    return tally.result()


def selective_scan(cases: int, seed: int = 0, max_length: int = 256) -> SuiteResult:
    """Fused scan against the scalar recurrence, plus a causality check."""
    tally = _Tally("selective_scan")
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64), no_grad():
        for i in range(cases):
            length = int(rng.integers(1, max_length + 1))
            d_inner, d_state = int(rng.integers(1, 9)), int(rng.integers(1, 17))
            u = rng.standard_normal((length, d_inner))
            delta = rng.uniform(0.01, 0.5, (length, d_inner))
            A = -rng.uniform(0.5, 4.0, (d_inner, d_state))
            B, C = rng.standard_normal((length, d_state)), rng.standard_normal((length, d_state))
            D = rng.standard_normal(d_inner)

            def run(u_in: np.ndarray) -> np.ndarray:
                args = [Tensor(v[None]) for v in (u_in, delta)] + [Tensor(A)]
                args += [Tensor(v[None]) for v in (B, C)] + [Tensor(D)]
                return F.selective_scan(*args).data[0]

            y = run(u)
            tally.close(f"scan[{i}] L={length}", y, oracles.sequential_scan(u, delta, A, B, C, D), 1e-10)
            t = int(rng.integers(length))
            bumped = u.copy()
            bumped[t] += 1.0
            tally.check(f"causality[{i}] t={t}", bool(np.array_equal(run(bumped)[:t], y[:t])))
    return tally.result()


def cross_scan_algebra(cases: int, seed: int = 0) -> SuiteResult:
    """Golden 2x2 orders, inverse permutations and merge linearity."""
    tally = _Tally("cross_scan")
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64), no_grad():
        golden = [[1, 2, 3, 4], [1, 3, 2, 4], [4, 3, 2, 1], [4, 2, 3, 1]]
        got = [s.data[:, 0].tolist() for s in cross_scan(Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]])))]
        tally.check(f"golden 2x2 orders {got}", got == golden)
        for i in range(cases):
            c, h, w = (int(v) for v in rng.integers(1, 7, size=3))
            x = rng.standard_normal((c, h, w))
            seqs = cross_scan(Tensor(x))
            for k in range(4):
                only = [s if j == k else Tensor(np.zeros_like(s.data)) for j, s in enumerate(seqs)]
                restored = cross_merge(only, h, w).data
                tally.check(f"inverse[{i}] branch {k} {h}x{w}", bool(np.array_equal(restored, x)))
            gains = rng.uniform(-2, 2, size=4)
            merged = cross_merge([s * float(g) for s, g in zip(seqs, gains)], h, w).data
            tally.close(f"linearity[{i}]", merged, gains.sum() * x, 1e-12)
    return tally.result()


def axial_attention(cases: int, seed: int = 0) -> SuiteResult:
    """Attention along each axis against the naive per-line oracle; row sums; isolation."""
    tally = _Tally("axial_attention")
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64), no_grad():
        for axis in (2, 3, 4):
            for i in range(cases):
                c = int(rng.integers(1, 4))
                shape = (int(rng.integers(1, 3)), c, *(int(v) for v in rng.integers(1, 5, size=3)))
                asa = AxialSelfAttention(c, AttentionConfig(), Rng(int(rng.integers(1 << 31))))
                x = rng.standard_normal(shape)
                got = asa.attend(Tensor(x), axis).data
                weights = tuple(p.weight.data for p in (asa.q_proj, asa.k_proj, asa.v_proj))
                biases = tuple(
                    np.zeros(c) if p.bias is None else p.bias.data for p in (asa.q_proj, asa.k_proj, asa.v_proj)
                )
                tally.close(f"axis{axis}[{i}]", got, oracles.naive_axial_attention(x, weights, biases, axis), 1e-6)  # type: ignore[arg-type]
                rows = asa.attention_weights(Tensor(x), axis).data
                tally.close(f"rowsum axis{axis}[{i}]", rows.sum(axis=-1), 1.0, 1e-6)

                bumped = x.copy()
                position = [int(rng.integers(e)) for e in shape]
                bumped[tuple(position)] += 1.0
                changed = asa.attend(Tensor(bumped), axis).data != got
                line = np.zeros(shape, dtype=bool)
                key = [slice(None) if a in (1, axis) else position[a] for a in range(5)]
                line[tuple(key)] = True
                tally.check(f"isolation axis{axis}[{i}]", not changed[~line].any())
    return tally.result()


# -- losses, morphology, metrics ---------------------------------------------


def dilation(cases: int, seed: int = 0) -> SuiteResult:
    tally = _Tally("dilation")
    rng = np.random.default_rng(seed)
    single = np.zeros((7, 7, 7), dtype=bool)
    single[3, 3, 3] = True
    tally.check("single voxel T=2 -> 125", dilate(VoxelMask.of(single), 2).count == 125)
    for i in range(cases):
        mask = rng.random((8, 8, 8)) < rng.uniform(0.005, 0.05)
        for t in range(4):
            got = dilate(VoxelMask.of(mask), t).mask
            tally.check(f"mask[{i}] T={t}", bool(np.array_equal(got, oracles.chebyshev_dilate(mask, t))))
    return tally.result()


def feature_loss(cases: int, seed: int = 0) -> SuiteResult:
    """Each feature-loss term against explicit-set brute force; degenerate inputs."""
    tally = _Tally("feature_loss")
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64), no_grad():
        for i in range(cases):
            extent = int(rng.integers(6, 9))
            channels = int(rng.choice([2, 4]))
            label = rng.random((extent,) * 3) < rng.uniform(0.02, 0.3)
            label[tuple(int(v) for v in rng.integers(extent, size=3))] = True
            features = rng.standard_normal((channels, *label.shape))
            t1, t2, n = int(rng.integers(0, 3)), int(rng.integers(0, 3)), int(rng.integers(1, 30))
            expected = oracles.brute_fr_terms(features, label, t1, t2, n)
            assert expected is not None
            f = Tensor(features)
            pos = VoxelMask.of(label)
            neg = pos.complement()
            center = foreground_center(f, pos)
            assert center is not None
            got = {
                "l_pos": positive_compactness(f, pos, center.f_p).item(),
                "l_boundary": boundary_loss(f, pos, neg, center.f_p, t1).item(),
                "l_neg": hard_negative_loss(f, pos, neg, center.f_p, n, t2).item(),
            }
            for term, value in got.items():
                tally.close(f"{term}[{i}]", value, expected[term], 1e-6)

        cfg = LossConfig(boundary_iterations=1, negative_iterations=1, num_hard_negatives=1000)
        features = Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
        empty = np.zeros((1, 4, 4, 4), dtype=bool)
        full = np.ones((1, 4, 4, 4), dtype=bool)
        tally.check("no foreground -> 0", fr_loss(features, empty, cfg).item() == 0.0)
        value = fr_loss(features, full, cfg).item()
        tally.check(f"all foreground finite ({value})", bool(np.isfinite(value)))
        saturated = rng.random((1, 4, 4, 4)) < 0.3
        saturated[0, 0, 0, 0] = True
        flat = LossConfig(boundary_iterations=0, negative_iterations=0, num_hard_negatives=10_000)
        value = fr_loss(features, saturated, flat).item()
        tally.check(f"N > |neg|, T = 0 finite ({value})", bool(np.isfinite(value)))
    return tally.result()


def overlap_metrics(cases: int, seed: int = 0) -> SuiteResult:
    tally = _Tally("metrics")
    rng = np.random.default_rng(seed)
    empty = VoxelMask.of(np.zeros((4, 4, 4), dtype=bool))
    tally.check("both empty -> 1", all(v == 1.0 for v in evaluate(empty, empty).values()))
    for i in range(cases):
        p = rng.random((8, 8, 8)) < rng.uniform(0, 0.5)
        g = rng.random((8, 8, 8)) < rng.uniform(0, 0.5)
        pred, gt = VoxelMask.of(p), VoxelMask.of(g)
        c = confusion_counts(pred, gt)
        tally.check(f"counts[{i}]", (c.tp, c.fp, c.fn, c.tn) == oracles.loop_confusion(p, g))
        m = evaluate(pred, gt)
        tally.check(f"dice >= iou [{i}]", m["dice"] >= m["iou"] - 1e-15)
        tally.check(f"range[{i}]", all(0.0 <= v <= 1.0 for v in m.values()))
    return tally.result()


def parameter_accounting(cases: int, seed: int = 0) -> SuiteResult:
    """Module parameter counts against the closed-form formulas."""
    tally = _Tally("accounting")
    rng = np.random.default_rng(seed)
    r = Rng(seed)
    tally.check("pointwise 4->8 = 40", Conv3d(4, 8, 1, r).num_parameters() == 40)
    tally.check("depthwise 3^3 C=16 = 448", Conv3d(16, 16, 3, r, padding=1, groups=16).num_parameters() == 448)
    tally.check("res residual is parameter-free", ResBlock(8, r).num_parameters() == accounting.res_block_params(8))
    for i in range(cases):
        cin, cout = int(rng.integers(1, 9)), int(rng.integers(1, 17))
        tally.check(f"dense[{i}]", DenseBlock(cin, cout, r).num_parameters() == accounting.dense_block_params(cin, cout))
        c = 4 * int(rng.integers(1, 4))
        cfg = MismConfig(
            scan=ScanConfig(d_state=int(rng.integers(1, 5)), shared_scan_params=bool(rng.integers(2))),
            asymmetric_split=bool(rng.integers(2)),
            attention=AttentionConfig(out_proj=bool(rng.integers(2))),
        )
        tally.check(f"mism[{i}]", MISM(c, cfg, r).num_parameters() == accounting.mism_params(c, cfg))
        volume_cfg = cfg.model_copy(update={"variant": "mamba3d"})
        count = Mamba3d(c, cfg.scan, r).num_parameters()
        tally.check(f"mamba3d[{i}]", count == accounting.mism_params(c, volume_cfg))
    for widths, stages in (([16, 32, 64, 128], [2, 3, 4]), ([8, 16], [2]), ([4, 8, 8], [1, 2, 3]), ([4, 8], [])):
        mism = MismConfig(scan=ScanConfig(d_state=4))
        config = NetworkConfig(stage_widths=widths, mism_stages=stages, mism=mism)
        model = build(config, seed=seed)
        tally.check(f"network {widths}", model.num_parameters() == accounting.network_params(config))
    volume = NetworkConfig(
        stage_widths=[6, 8], mism_stages=[2], mism=MismConfig(variant="mamba3d", scan=ScanConfig(d_state=2))
    )
    tally.check("network mamba3d", build(volume, seed=seed).num_parameters() == accounting.network_params(volume))
    return tally.result()


SUITES: dict[str, tuple[Callable[..., SuiteResult], int, int]] = {
    # name: (suite, full count, quick count)
    "gradients": (gradients, 50, 2),
    "kernels": (kernels, 20, 2),
    "selective_scan": (selective_scan, 100, 5),
    "cross_scan": (cross_scan_algebra, 50, 5),
    "axial_attention": (axial_attention, 50, 3),
    "dilation": (dilation, 100, 5),
    "feature_loss": (feature_loss, 100, 5),
    "metrics": (overlap_metrics, 1000, 20),
    "accounting": (parameter_accounting, 10, 2),
}


def run_suites(names: list[str] | None = None, scale: Scale = "full", seed: int = 0) -> list[SuiteResult]:
    """Run the named suites (all by default) and log one line per suite."""
    selected = names or list(SUITES)
    unknown = [n for n in selected if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; available: {list(SUITES)}")
    results = []
    for name in selected:
        suite, full, quick = SUITES[name]
        started = time.perf_counter()
        result = suite(full if scale == "full" else quick, seed)
        status = "passed" if result.passed else f"FAILED ({len(result.failures)})"
        logger.info(
            f"Suite {name}: {status}, {result.cases} cases, max error {result.max_error:.2e}, "
            f"{time.perf_counter() - started:.1f}s"
        )
        for failure in result.failures[:10]:
            logger.error(f"  {name}: {failure}")
        results.append(result)
    return results
