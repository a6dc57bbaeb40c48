import numpy as np
import pytest

from models.config import ConfigError, MismConfig, ScanConfig
from network.accounting import mism_params
from network.mism import MISM, VIEWS, ViewBranch, asc_split, reslice, split_sizes, unslice, view_process
from tensor import Rng, ShapeError, Tensor
from tensor.gradcheck import BLOCK_ATOL, BLOCK_STEP, check_gradients

SMALL_SCAN = ScanConfig(d_state=2, expansion=1)


def test_split_sizes_are_half_quarter_quarter():
    assert split_sizes(16) == (8, 4, 4)
    with pytest.raises(ConfigError):
        split_sizes(6)


def test_asc_split_is_contiguous():
    x = Tensor(np.arange(8, dtype=np.float32).reshape(1, 8, 1, 1, 1))
    parts = [p.data.ravel().tolist() for p in asc_split(x)]
    assert parts == [[0, 1, 2, 3], [4, 5], [6, 7]]


@pytest.mark.parametrize("view,slice_shape", [("axial", (4, 5)), ("coronal", (3, 5)), ("sagittal", (3, 4))])
def test_reslice_extents_and_inverse(view, slice_shape, rng):
    x = rng.standard_normal((2, 2, 3, 4, 5))
    slices = reslice(Tensor(x), view)
    assert slices.shape[1:] == (2, *slice_shape)
    np.testing.assert_array_equal(unslice(slices, view, x.shape).data, x)


def test_axial_slices_are_fixed_depth_planes(rng):
    x = rng.standard_normal((1, 2, 3, 4, 5))
    slices = reslice(Tensor(x), "axial").data
    np.testing.assert_array_equal(slices[1], x[0, :, 1])


def test_view_process_checks_the_branch():
    branch = ViewBranch(2, "coronal", MismConfig(scan=SMALL_SCAN), Rng(0))
    with pytest.raises(ValueError):
        view_process(Tensor(np.zeros((1, 2, 2, 2, 2))), "axial", branch)
    with pytest.raises(ValueError):
        view_process(Tensor(np.zeros((1, 2, 2, 2, 2))), "oblique", branch)


def test_output_shape_and_branch_widths():
    mism = MISM(8, MismConfig(scan=SMALL_SCAN), Rng(0))
    assert [b.channels for b in mism.branches] == [4, 2, 2]
    assert [b.view for b in mism.branches] == list(VIEWS)
    assert mism(Tensor(np.zeros((1, 8, 2, 3, 4)))).shape == (1, 8, 2, 3, 4)


def test_rejects_wrong_input():
    mism = MISM(4, MismConfig(scan=SMALL_SCAN), Rng(0))
    with pytest.raises(ShapeError):
        mism(Tensor(np.zeros((1, 8, 2, 2, 2))))


def test_share_isolation(rng, float64):
    """Perturbing the sagittal share leaves the axial and coronal branch outputs unchanged."""
    mism = MISM(4, MismConfig(scan=SMALL_SCAN), Rng(3))
    x = rng.standard_normal((1, 4, 2, 3, 2))
    base = mism.branch_outputs(Tensor(x))
    bumped = x.copy()
    bumped[:, 3] += 1.0
    after = mism.branch_outputs(Tensor(bumped))
    np.testing.assert_array_equal(after[0].data, base[0].data)
    np.testing.assert_array_equal(after[1].data, base[1].data)
    assert not np.allclose(after[2].data, base[2].data)


@pytest.mark.parametrize(
    "cfg",
    [
        MismConfig(scan=SMALL_SCAN),
        MismConfig(scan=SMALL_SCAN, use_asa=False),
        MismConfig(scan=SMALL_SCAN, use_vssb=False),
        MismConfig(scan=SMALL_SCAN, asymmetric_split=False),
        MismConfig(scan=SMALL_SCAN, fuse=False),
    ],
    ids=["full", "no-asa", "no-vssb", "symmetric", "no-fuse"],
)
def test_parameter_count_matches_formula(cfg):
    assert MISM(8, cfg, Rng(0)).num_parameters() == mism_params(8, cfg)


def test_symmetric_mode_forces_the_fuse(log_records):
    mism = MISM(4, MismConfig(scan=SMALL_SCAN, asymmetric_split=False, fuse=False), Rng(0))
    assert mism.fuse is not None and mism.fuse.in_channels == 12
    assert any("enabling it" in message for message in log_records)
    assert mism(Tensor(np.zeros((1, 4, 2, 2, 2)))).shape == (1, 4, 2, 2, 2)


def test_without_fuse_returns_the_concat(rng):
    mism = MISM(4, MismConfig(scan=SMALL_SCAN, fuse=False), Rng(0))
    x = Tensor(rng.standard_normal((1, 4, 2, 2, 2)).astype(np.float32))
    expected = np.concatenate([b.data for b in mism.branch_outputs(x)], axis=1)
    np.testing.assert_array_equal(mism(x).data, expected)


def test_gradients(rng, float64):
    mism = MISM(4, MismConfig(scan=SMALL_SCAN), Rng(6))
    x = Tensor(rng.standard_normal((1, 4, 2, 2, 3)), requires_grad=True)
    weights = Tensor(rng.standard_normal(x.shape))
    result = check_gradients(
        lambda: (mism(x) * weights).sum(), [x, *mism.parameters()], max_entries=4, h=BLOCK_STEP, atol=BLOCK_ATOL
    )
    assert result.passed


def test_flops_cover_every_branch():
    cfg = MismConfig(scan=SMALL_SCAN)
    mism = MISM(8, cfg, Rng(0))
    total, shape = mism.flops((1, 8, 4, 4, 4))
    branches = sum(b.flops((1, b.channels, 4, 4, 4))[0] for b in mism.branches)
    assert shape == (1, 8, 4, 4, 4)
    assert total > branches > 0
