import math

import numpy as np
import pytest

from losses import (
    boundary_loss,
    boundary_region,
    ce_loss,
    compute_losses,
    dice_loss,
    dilate,
    foreground_center,
    fr_loss,
    fr_loss_terms,
    hard_negative_loss,
    hard_negative_region,
    label_batch,
    mine_hard_negatives,
    positive_compactness,
    total_loss,
)
from models.config import LossConfig
from models.volume import VoxelMask
from tensor import ShapeError, Tensor
from tensor.gradcheck import check_gradients
from verification import oracles


def two_class_probs(foreground: np.ndarray) -> Tensor:
    fg = foreground.astype(np.float64)
    return Tensor(np.stack([1.0 - fg, fg], axis=1))


class TestSegmentationLosses:
    def test_dice_is_zero_for_a_perfect_prediction(self, float64):
        labels = np.zeros((2, 4, 4, 4), dtype=bool)
        labels[0, 1:3, 1:3, 1:3] = True
        assert dice_loss(two_class_probs(labels), labels).item() == pytest.approx(0.0, abs=1e-12)

    def test_dice_is_near_one_for_a_disjoint_prediction(self, float64):
        labels = np.zeros((1, 4, 4, 4), dtype=bool)
        labels[0, :2] = True
        assert dice_loss(two_class_probs(~labels), labels).item() == pytest.approx(1.0, abs=1e-9)

    def test_ce_of_uniform_logits_is_log_two(self, float64):
        labels = np.random.default_rng(0).random((1, 3, 3, 3)) < 0.5
        logits = Tensor(np.zeros((1, 2, 3, 3, 3)))
        assert ce_loss(logits, labels).item() == pytest.approx(math.log(2.0))

    def test_ce_gradients(self, rng, float64):
        logits = Tensor(rng.standard_normal((2, 2, 2, 2, 2)), requires_grad=True)
        labels = rng.random((2, 2, 2, 2)) < 0.5
        assert check_gradients(lambda: ce_loss(logits, labels), [logits]).passed

    def test_label_shapes_are_checked(self):
        with pytest.raises(ShapeError):
            ce_loss(Tensor(np.zeros((1, 2, 4, 4, 4))), np.zeros((1, 4, 4, 2), dtype=bool))
        with pytest.raises(ShapeError):
            label_batch(np.zeros((4, 4, 4)))

    def test_label_batch_accepts_masks(self):
        masks = [VoxelMask.of(np.eye(2, dtype=bool)[None].repeat(2, axis=0))] * 3
        assert label_batch(masks).shape == (3, 2, 2, 2)


class TestDilation:
    def test_single_voxel_radius_two_is_a_five_cube(self):
        mask = np.zeros((9, 9, 9), dtype=bool)
        mask[4, 4, 4] = True
        grown = dilate(VoxelMask.of(mask), 2)
        assert grown.count == 125
        assert grown.mask[2:7, 2:7, 2:7].all()

    def test_corner_is_clipped_at_the_border(self):
        mask = np.zeros((4, 4, 4), dtype=bool)
        mask[0, 0, 0] = True
        assert dilate(VoxelMask.of(mask), 1).count == 8

    def test_zero_iterations_is_identity(self, rng):
        mask = VoxelMask.of(rng.random((5, 5, 5)) < 0.2)
        np.testing.assert_array_equal(dilate(mask, 0).mask, mask.mask)

    @pytest.mark.parametrize("radius", [1, 2, 3])
    def test_matches_chebyshev_ball(self, radius, rng):
        mask = rng.random((7, 6, 8)) < 0.05
        grown = dilate(VoxelMask.of(mask), radius)
        np.testing.assert_array_equal(grown.mask, oracles.chebyshev_dilate(mask, radius))
        assert VoxelMask.of(mask).issubset(grown)

    def test_negative_iterations_rejected(self):
        with pytest.raises(ValueError):
            dilate(VoxelMask.of(np.ones((2, 2, 2), dtype=bool)), -1)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_feature_terms_match_explicit_sets(seed, float64):
    rng = np.random.default_rng(seed)
    label = rng.random((6, 6, 6)) < 0.15
    label[2, 3, 1] = True
    features = rng.standard_normal((3, 6, 6, 6))
    t1, t2, n = seed % 3, (seed + 1) % 3, 5 + seed
    expected = oracles.brute_fr_terms(features, label, t1, t2, n)
    assert expected is not None

    f = Tensor(features)
    pos = VoxelMask.of(label)
    neg = pos.complement()
    center = foreground_center(f, pos)
    assert center is not None and center.n_pos == pos.count
    assert positive_compactness(f, pos, center.f_p).item() == pytest.approx(expected["l_pos"], abs=1e-9)
    assert boundary_loss(f, pos, neg, center.f_p, t1).item() == pytest.approx(expected["l_boundary"], abs=1e-9)
    got = hard_negative_loss(f, pos, neg, center.f_p, n, t2).item()
    assert got == pytest.approx(expected["l_neg"], abs=1e-9)


def test_hard_negative_ties_break_by_voxel_index(float64):
    features = Tensor(np.ones((2, 3, 3, 3)))
    label = np.zeros((3, 3, 3), dtype=bool)
    label[0, 0, 0] = True
    pos = VoxelMask.of(label)
    center = foreground_center(features, pos)
    assert center is not None
    seeds = mine_hard_negatives(features, pos.complement(), center.f_p, 3)
    assert seeds.indices().tolist() == [1, 2, 3]


def test_hard_negative_count_is_capped(float64, log_records):
    features = Tensor(np.random.default_rng(0).standard_normal((2, 2, 2, 2)))
    label = np.zeros((2, 2, 2), dtype=bool)
    label[0, 0, 0] = True
    pos = VoxelMask.of(label)
    center = foreground_center(features, pos)
    assert center is not None
    seeds = mine_hard_negatives(features, pos.complement(), center.f_p, 100)
    assert seeds.count == 7
    assert any("capped at 7" in message for message in log_records)


class TestFeatureLoss:
    cfg = LossConfig(boundary_iterations=1, negative_iterations=1, num_hard_negatives=4)

    def sample(self, rng):
        labels = np.zeros((2, 4, 4, 4), dtype=bool)
        labels[0, 1:3, 1:3, 1:3] = True
        labels[1, 0, 0, :2] = True
        return Tensor(rng.standard_normal((2, 3, 4, 4, 4)), requires_grad=True), labels

    def test_empty_sample_counts_in_the_batch_mean(self, rng, float64, log_records):
        features, labels = self.sample(rng)
        labels[1] = False
        both, _ = fr_loss_terms(features, labels, self.cfg)
        alone, _ = fr_loss_terms(features[:1], labels[:1], self.cfg)
        assert both.item() == pytest.approx(alone.item() / 2)
        assert any("no foreground" in message for message in log_records)

    def test_no_foreground_anywhere_is_zero(self, rng, float64):
        features, labels = self.sample(rng)
        assert fr_loss(features, np.zeros_like(labels), self.cfg).item() == 0.0

    def test_all_foreground_is_finite(self, rng, float64):
        features, labels = self.sample(rng)
        assert np.isfinite(fr_loss(features, np.ones_like(labels), self.cfg).item())

    def test_term_toggles(self, rng, float64):
        features, labels = self.sample(rng)
        only_pos = self.cfg.model_copy(update={"use_boundary": False, "use_neg": False})
        loss, parts = fr_loss_terms(features, labels, only_pos)
        assert parts["l_boundary"] == parts["l_neg"] == 0.0
        assert loss.item() == pytest.approx(parts["l_pos"])

        _, full = fr_loss_terms(features, labels, self.cfg)
        assert full["l_pos"] == pytest.approx(parts["l_pos"])
        assert full["l_boundary"] > 0

    def test_detached_center_changes_the_gradient(self, rng, float64):
        features, labels = self.sample(rng)
        only_pos = self.cfg.model_copy(update={"use_boundary": False, "use_neg": False})
        fr_loss(features, labels, only_pos).backward()
        attached = features.grad.copy()
        features.zero_grad()
        fr_loss(features, labels, only_pos.model_copy(update={"fp_grad": False})).backward()
        assert not np.allclose(attached, features.grad)

    def test_gradients(self, rng, float64):
        features, labels = self.sample(rng)
        result = check_gradients(lambda: fr_loss(features, labels, self.cfg), [features], max_entries=40)
        assert result.passed


class TestCombinedLoss:
    def test_weights_combine_the_terms(self, rng, float64):
        logits = Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
        features = Tensor(rng.standard_normal((1, 3, 4, 4, 4)))
        labels = np.zeros((1, 4, 4, 4), dtype=bool)
        labels[0, 1:3, 1:3, 1:3] = True
        cfg = LossConfig(boundary_iterations=1, negative_iterations=1, num_hard_negatives=4)
        terms = compute_losses(logits, features, labels, cfg)
        assert terms.total.item() == pytest.approx(terms.ce + terms.dice + 5.0 * terms.fr)
        assert terms.fr == pytest.approx(terms.l_pos + terms.l_boundary + terms.l_neg)
        assert set(terms.log_fields()) >= {"loss", "ce", "dice", "fr"}

    def test_zero_feature_weight_skips_the_feature_loss(self, rng, float64):
        logits = Tensor(rng.standard_normal((1, 2, 2, 2, 2)))
        labels = np.ones((1, 2, 2, 2), dtype=bool)
        terms = compute_losses(logits, Tensor(np.zeros((1, 3, 2, 2, 2))), labels, LossConfig(fr_weight=0.0))
        assert terms.fr == 0.0
        assert terms.total.item() == pytest.approx(terms.ce + terms.dice)


class TestRegionSets:
    def instance(self, seed: int):
        rng = np.random.default_rng(seed)
        label = rng.random((7, 7, 7)) < 0.08
        label[3, 3, 3] = True
        features = Tensor(rng.standard_normal((3, 7, 7, 7)))
        pos = VoxelMask.of(label)
        center = foreground_center(features, pos)
        assert center is not None
        return features, pos, pos.complement(), center.f_p

    def test_single_voxel_boundary_is_its_neighborhood(self):
        label = np.zeros((4, 4, 4), dtype=bool)
        label[1, 1, 1] = True
        pos = VoxelMask.of(label)
        assert boundary_region(pos, pos.complement(), 1).count == 26

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_boundary_grows_with_iterations(self, seed, float64):
        _, pos, neg, _ = self.instance(seed)
        regions = [boundary_region(pos, neg, t) for t in range(4)]
        assert regions[0].count == 0
        for smaller, larger in zip(regions, regions[1:]):
            assert smaller.issubset(larger)
            assert larger.issubset(neg)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_hard_negative_region_grows_with_count_and_iterations(self, seed, float64):
        features, _, neg, f_p = self.instance(seed)
        previous = None
        for count in (1, 4, 16, 64):
            seeds = mine_hard_negatives(features, neg, f_p, count)
            region = hard_negative_region(seeds, neg, 1)
            assert seeds.issubset(region) and region.issubset(neg)
            if previous is not None:
                assert previous.issubset(region)
            previous = region
        seeds = mine_hard_negatives(features, neg, f_p, 8)
        grown = [hard_negative_region(seeds, neg, t) for t in range(4)]
        for smaller, larger in zip(grown, grown[1:]):
            assert smaller.issubset(larger)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_terms_are_bounded(self, seed, float64):
        features, pos, neg, f_p = self.instance(seed)
        assert 0.0 <= positive_compactness(features, pos, f_p).item() <= 2.0
        assert 0.0 <= boundary_loss(features, pos, neg, f_p, 2).item() <= 1.0
        assert 0.0 <= hard_negative_loss(features, pos, neg, f_p, 10, 1).item() <= 1.0

    def test_terms_ignore_feature_scale(self, float64):
        features, pos, _, _ = self.instance(3)
        labels = pos.mask[None]
        cfg = LossConfig(boundary_iterations=2, negative_iterations=1, num_hard_negatives=10)
        _, base = fr_loss_terms(Tensor(features.data[None]), labels, cfg)
        _, scaled = fr_loss_terms(Tensor(3.7 * features.data[None]), labels, cfg)
        for name in ("l_pos", "l_boundary", "l_neg"):
            assert scaled[name] == pytest.approx(base[name], abs=1e-6)


def test_orthogonal_pair_compactness(float64):
    features = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]).T.reshape(2, 1, 1, 2))
    pos = VoxelMask.of(np.ones((1, 1, 2), dtype=bool))
    center = foreground_center(features, pos)
    assert center is not None
    np.testing.assert_allclose(center.f_p.data, [0.5, 0.5])
    assert positive_compactness(features, pos, center.f_p).item() == pytest.approx(1 - math.sqrt(0.5), abs=1e-4)


def test_total_is_affine_in_the_feature_weight(rng, float64):
    logits = Tensor(rng.standard_normal((2, 2, 4, 4, 4)))
    features = Tensor(rng.standard_normal((2, 3, 4, 4, 4)))
    labels = rng.random((2, 4, 4, 4)) < 0.3
    base = LossConfig(boundary_iterations=1, negative_iterations=1, num_hard_negatives=4)

    def total(weight: float) -> float:
        return total_loss(logits, features, labels, base.model_copy(update={"fr_weight": weight})).item()

    assert total(10.0) - total(0.0) == pytest.approx(2 * (total(5.0) - total(0.0)), abs=1e-7)
