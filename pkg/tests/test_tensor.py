import numpy as np
import pytest

import functions as F
from tensor import GradError, Rng, ShapeError, Tensor, default_dtype, get_default_dtype, no_grad
from tensor.gradcheck import BLOCK_ATOL, BLOCK_STEP, check_gradients


def test_default_dtype_is_float32_and_scoped():
    assert get_default_dtype() == np.float32
    assert Tensor([1, 2, 3]).dtype == np.float32
    with default_dtype(np.float64):
        assert Tensor([1, 2, 3]).dtype == np.float64
    assert get_default_dtype() == np.float32


def test_unsupported_default_dtype_rejected():
    with pytest.raises(ValueError):
        with default_dtype(np.int32):
            pass


def test_zero_extent_rejected():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 0)))


def test_item_needs_single_element():
    assert Tensor(3.5).item() == 3.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_scalars_keep_zero_dimensions(float64):
    assert Tensor(1.0).shape == ()
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    total = x.sum()
    assert total.shape == ()
    assert x.mean().shape == ()
    total.backward()
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_product_rule(float64):
    a = Tensor([2.0, 3.0], requires_grad=True)
    b = Tensor([5.0, 7.0], requires_grad=True)
    (a * b + a).sum().backward()
    np.testing.assert_allclose(a.grad, [6.0, 8.0])
    np.testing.assert_allclose(b.grad, [2.0, 3.0])


def test_shared_subexpression_accumulates(float64):
    x = Tensor(3.0, requires_grad=True)
    y = x * x
    (y + y * x).backward()
    # d/dx (x^2 + x^3) = 2x + 3x^2
    assert x.grad == pytest.approx(6.0 + 27.0)


def test_leaf_gradients_accumulate_until_zeroed(float64):
    x = Tensor([1.0, 2.0], requires_grad=True)
    (x * 2.0).sum().backward()
    (x * 2.0).sum().backward()
    np.testing.assert_allclose(x.grad, [4.0, 4.0])
    x.zero_grad()
    assert x.grad is None


def test_broadcast_gradient_is_summed(float64):
    x = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.ones(4), requires_grad=True)
    (x + b).sum().backward()
    np.testing.assert_allclose(b.grad, np.full(4, 3.0))


def test_backward_needs_scalar_root():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(GradError):
        (x * 2.0).backward()


def test_backward_needs_grad_tracking():
    with pytest.raises(GradError):
        Tensor(1.0).backward()


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad and y.node is None


def test_detach_cuts_the_graph(float64):
    x = Tensor([2.0], requires_grad=True)
    y = (x * x.detach()).sum()
    y.backward()
    np.testing.assert_allclose(x.grad, [2.0])


def test_reshape_infers_minus_one():
    assert Tensor(np.zeros((2, 3, 4))).reshape(6, -1).shape == (6, 4)
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 3))).reshape(4, 2)


def test_rng_is_reproducible_and_spawn_is_independent():
    a, b = Rng(7), Rng(7)
    np.testing.assert_array_equal(a.normal((3, 3)), b.normal((3, 3)))
    before = a.state()
    a.spawn(1).normal((4,))
    assert a.state() == before


def test_rng_draws_agree_across_dtypes():
    with default_dtype(np.float64):
        wide = Rng(3).normal((5,))
    narrow = Rng(3).normal((5,))
    np.testing.assert_allclose(narrow, wide.astype(np.float32))


def test_gradcheck_passes_on_correct_gradient(float64):
    x = Tensor(np.array([0.3, -1.2, 2.0]), requires_grad=True)
    result = check_gradients(lambda: (x * x * x).sum(), [x])
    assert result.passed and result.checked == 3


def test_gradcheck_rejects_float32():
    x = Tensor(np.ones(2, dtype=np.float32), requires_grad=True)
    with pytest.raises(ValueError):
        check_gradients(lambda: x.sum(), [x])


def test_gradcheck_detects_a_wrong_gradient(float64):
    x = Tensor(np.array([1.5, -0.5]), requires_grad=True)
    frozen = Tensor(x.data)  # shares storage, tracks no gradient

    # forward is x^2 but only one factor is differentiated, so backward reports x
    result = check_gradients(lambda: (x * frozen).sum(), [x])
    assert not result.passed


def test_gradcheck_zero_gradient_at_a_kink(float64):
    x = Tensor(np.array([0.0, 0.7]), requires_grad=True)

    # relu(x)^2 has slope 0 at 0, but its central difference there is h / 2
    def loss():
        return (F.relu(x) * F.relu(x)).sum()

    assert not check_gradients(loss, [x]).passed
    assert check_gradients(loss, [x], h=BLOCK_STEP, atol=BLOCK_ATOL).passed
