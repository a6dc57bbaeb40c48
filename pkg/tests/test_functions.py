import numpy as np
import pytest

import functions as F
from functions.scan import discretize
from tensor import ShapeError, Tensor
from tensor.gradcheck import check_gradients
from verification import oracles


def leaf(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True)


@pytest.mark.parametrize(
    "op",
    [F.exp, F.sigmoid, F.silu, F.softplus, lambda x: F.softmax(x, axis=0), F.relu],
    ids=["exp", "sigmoid", "silu", "softplus", "softmax", "relu"],
)
def test_elementwise_gradients(op, rng, float64):
    x = leaf(rng, 3, 4)
    w = Tensor(rng.standard_normal((3, 4)))
    assert check_gradients(lambda: (op(x) * w).sum(), [x]).passed


def test_division_and_log_gradients(rng, float64):
    a = leaf(rng, 2, 3)
    b = Tensor(rng.uniform(0.5, 2.0, (3,)), requires_grad=True)
    assert check_gradients(lambda: F.log(F.div(a * a + 1.0, b)).sum(), [a, b]).passed


def test_softmax_is_shift_invariant_and_stable():
    x = Tensor(np.array([[1000.0, 1001.0, 1002.0]]))
    p = F.softmax(x, axis=-1).data
    np.testing.assert_allclose(p.sum(), 1.0, rtol=1e-6)
    np.testing.assert_allclose(p, F.softmax(Tensor(np.array([[0.0, 1.0, 2.0]])), axis=-1).data, rtol=1e-6)
    assert np.isfinite(F.log_softmax(x, axis=-1).data).all()


def test_softplus_saturates_without_overflow():
    out = F.softplus(Tensor(np.array([-1000.0, 0.0, 1000.0]))).data
    np.testing.assert_allclose(out, [0.0, np.log(2.0), 1000.0], rtol=1e-6)


def test_batched_matmul_matches_oracle(rng, float64):
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 5))
    np.testing.assert_allclose(F.matmul(Tensor(a), Tensor(b)).data, oracles.loop_matmul(a, b), atol=1e-12)
    with pytest.raises(ShapeError):
        F.matmul(Tensor(a), Tensor(a))


@pytest.mark.parametrize("stride,padding,groups", [(1, 1, 1), (2, 1, 1), (1, 0, 2), (2, 1, 4)])
def test_conv3d_matches_loop_oracle(stride, padding, groups, rng, float64):
    x = rng.standard_normal((2, 4, 5, 4, 6))
    w = rng.standard_normal((4, 4 // groups, 3, 3, 3))
    b = rng.standard_normal(4)
    got = F.conv3d(Tensor(x), Tensor(w), Tensor(b), stride, padding, groups).data
    np.testing.assert_allclose(got, oracles.loop_conv3d(x, w, b, stride, padding, groups), atol=1e-10)


def test_conv3d_gradients(rng, float64):
    x, w, b = leaf(rng, 1, 2, 4, 3, 4), leaf(rng, 2, 1, 3, 3, 3), leaf(rng, 2)
    weights = Tensor(rng.standard_normal((1, 2, 2, 2, 2)))
    result = check_gradients(lambda: (F.conv3d(x, w, b, 2, 1, 2) * weights).sum(), [x, w, b])
    assert result.passed


def test_conv3d_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        F.conv3d(Tensor(np.zeros((1, 3, 4, 4, 4))), Tensor(np.zeros((2, 2, 3, 3, 3))))


def test_transpose_conv_matches_oracle_and_is_the_adjoint(rng, float64):
    x, w, b = rng.standard_normal((1, 3, 2, 3, 2)), rng.standard_normal((3, 2, 2, 2, 2)), rng.standard_normal(2)
    up = F.transpose_conv3d(Tensor(x), Tensor(w), Tensor(b)).data
    np.testing.assert_allclose(up, oracles.loop_transpose_conv3d(x, w, b), atol=1e-10)

    y = rng.standard_normal((1, 2, 4, 6, 4))
    up = F.transpose_conv3d(Tensor(x), Tensor(w)).data
    down = F.conv3d(Tensor(y), Tensor(w), stride=2).data
    assert np.sum(up * y) == pytest.approx(np.sum(x * down), rel=1e-12)


def test_transpose_conv_needs_kernel_equal_to_stride():
    with pytest.raises(ShapeError):
        F.transpose_conv3d(Tensor(np.zeros((1, 2, 2, 2, 2))), Tensor(np.zeros((2, 2, 3, 3, 3))))


def test_avg_pool_gradients_and_odd_extents(rng, float64):
    x = leaf(rng, 1, 2, 4, 2, 4)
    assert check_gradients(lambda: (F.avg_pool3d(x) * F.avg_pool3d(x)).sum(), [x]).passed
    with pytest.raises(ShapeError):
        F.avg_pool3d(Tensor(np.zeros((1, 1, 3, 2, 2))))


def test_instance_norm_statistics(rng, float64):
    x = Tensor(rng.standard_normal((2, 3, 4, 4, 4)) * 5.0 + 2.0)
    y = F.instance_norm(x).data
    np.testing.assert_allclose(y.mean(axis=(2, 3, 4)), 0.0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(2, 3, 4)), 1.0, rtol=1e-5)


def test_layer_norm_gradients_and_extent_check(rng, float64):
    x = leaf(rng, 4, 6)
    w = Tensor(rng.standard_normal((4, 6)))
    assert check_gradients(lambda: (F.layer_norm(x, (6,)) * w).sum(), [x]).passed
    with pytest.raises(ShapeError):
        F.layer_norm(x, (4,))


def test_structural_ops_route_gradients(rng, float64):
    a, b = leaf(rng, 2, 3), leaf(rng, 2, 2)
    idx = np.array([4, 0, 0, 3])
    w = Tensor(rng.standard_normal((2, 4)))

    def loss():
        joined = F.concat([a, b], axis=1)
        first, rest = F.split(joined, [1, 4], axis=1)
        return (F.take(joined, idx, axis=1) * w).sum() + (first * first).sum() + rest.mean()

    assert check_gradients(loss, [a, b]).passed


def test_take_repeats_accumulate_gradient(float64):
    x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    F.take(x, np.array([0, 0, 2]), axis=0).sum().backward()
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0])


def test_structural_shape_errors():
    x = Tensor(np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        F.split(x, [1, 1], axis=1)
    with pytest.raises(ShapeError):
        F.concat([x, Tensor(np.zeros((3, 3)))], axis=1)
    with pytest.raises(ShapeError):
        F.take(x, np.array([3]), axis=1)
    with pytest.raises(ShapeError):
        x.permute(0, 0)


class TestSelectiveScan:
    def operands(self, rng, n=2, length=7, d_inner=3, d_state=4):
        return (
            rng.standard_normal((n, length, d_inner)),
            rng.uniform(0.01, 0.5, (n, length, d_inner)),
            -rng.uniform(0.5, 3.0, (d_inner, d_state)),
            rng.standard_normal((n, length, d_state)),
            rng.standard_normal((n, length, d_state)),
            rng.standard_normal(d_inner),
        )

    def test_matches_sequential_recurrence(self, rng, float64):
        u, delta, A, B, C, D = self.operands(rng)
        y = F.selective_scan(*(Tensor(v) for v in (u, delta, A, B, C, D))).data
        for i in range(u.shape[0]):
            expected = oracles.sequential_scan(u[i], delta[i], A, B[i], C[i], D)
            np.testing.assert_allclose(y[i], expected, atol=1e-10)

    def test_length_one_is_a_single_update(self, rng, float64):
        u, delta, A, B, C, D = self.operands(rng, n=1, length=1)
        y = F.selective_scan(*(Tensor(v) for v in (u, delta, A, B, C, D))).data
        h = delta[0, 0][:, None] * B[0, 0][None, :] * u[0, 0][:, None]
        np.testing.assert_allclose(y[0, 0], h @ C[0, 0] + D * u[0, 0], atol=1e-12)

    def test_is_causal(self, rng, float64):
        u, delta, A, B, C, D = self.operands(rng, n=1, length=9)
        rest = [Tensor(v) for v in (delta, A, B, C, D)]
        y = F.selective_scan(Tensor(u), *rest).data
        bumped = u.copy()
        bumped[0, 5] += 3.0
        y2 = F.selective_scan(Tensor(bumped), *rest).data
        np.testing.assert_array_equal(y2[0, :5], y[0, :5])
        assert not np.allclose(y2[0, 5:], y[0, 5:])

    def test_gradients(self, rng, float64):
        tensors = [Tensor(v, requires_grad=True) for v in self.operands(rng, length=5)]
        w = Tensor(rng.standard_normal(tensors[0].shape))
        assert check_gradients(lambda: (F.selective_scan(*tensors) * w).sum(), tensors).passed

    def test_operand_shapes_are_checked(self, rng, float64):
        u, delta, A, B, C, D = self.operands(rng)
        with pytest.raises(ShapeError):
            F.selective_scan(*(Tensor(v) for v in (u, delta, A, B[:, :-1], C, D)))

    def test_discretize_is_zero_order_hold(self):
        A = np.array([[-1.0, -2.0]])
        A_bar, B_bar = discretize(A, np.array([3.0, 4.0]), np.array([0.5]))
        np.testing.assert_allclose(A_bar, np.exp([[-0.5, -1.0]]))
        np.testing.assert_allclose(B_bar, [[1.5, 2.0]])
