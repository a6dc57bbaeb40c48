import json
import math

import numpy as np
import pytest

from models.config import load_config
from models.state import TrainState
from network.module import Parameter
from services import gen_synthetic, latest_checkpoint
from tests.conftest import CONFIGS
from training import AdamW, PatchPrefetcher, Trainer, adamw_step, batch_for_step, evaluate_records
from training.trainer import STEP_FIELDS, pad_to_multiple


class TestAdamW:
    def test_two_step_hand_trace(self):
        p = Parameter(np.array([1.0]))
        state = TrainState()
        lr, b1, b2, eps, wd = 0.1, 0.9, 0.999, 1e-8, 0.01

        p.grad = np.array([0.5])
        adamw_step({"p": p}, state, lr, (b1, b2), eps, wd)
        m, v = 0.1 * 0.5, 0.001 * 0.25
        expected = 1.0 - lr * wd * 1.0
        expected -= lr * (m / 0.1) / (math.sqrt(v / 0.001) + eps)
        assert p.data[0] == pytest.approx(expected, abs=1e-12)

        p.grad = np.array([-0.25])
        adamw_step({"p": p}, state, lr, (b1, b2), eps, wd)
        m = b1 * m + 0.1 * -0.25
        v = b2 * v + 0.001 * 0.0625
        expected -= lr * wd * expected
        expected -= lr * (m / (1 - b1**2)) / (math.sqrt(v / (1 - b2**2)) + eps)
        assert p.data[0] == pytest.approx(expected, abs=1e-12)
        assert state.step == 2
        assert state.exp_avg["p"][0] == pytest.approx(m, abs=1e-15)

    def test_zero_gradient_without_decay_is_a_fixed_point(self, rng):
        values = rng.standard_normal((3, 4))
        p = Parameter(values.copy())
        optimizer = AdamW({"p": p}, lr=0.5, weight_decay=0.0)
        state = TrainState()
        for _ in range(3):
            optimizer.step(state)
        np.testing.assert_array_equal(p.data, values)

    def test_decay_alone_shrinks_by_lr_times_wd(self, rng):
        values = rng.standard_normal(5)
        p = Parameter(values.copy())
        p.grad = np.zeros(5)
        adamw_step({"p": p}, TrainState(), lr=0.1, weight_decay=0.5)
        np.testing.assert_allclose(p.data, values * (1 - 0.05), rtol=1e-14)

    def test_moment_shape_mismatch(self):
        p = Parameter(np.zeros(3))
        state = TrainState(exp_avg={"p": np.zeros(2)})
        with pytest.raises(ValueError):
            adamw_step({"p": p}, state)


@pytest.fixture
def smoke(tmp_path):
    config = load_config(CONFIGS / "smoke.yaml")
    train = config.train.model_copy(update={"checkpoint_dir": str(tmp_path / "checkpoints")})
    return config.model_copy(update={"train": train})


@pytest.fixture(scope="module")
def volumes():
    return gen_synthetic(2, 8, seed=0)


def params_of(trainer: Trainer) -> dict[str, np.ndarray]:
    return trainer.model.state_dict()


def assert_same_params(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> None:
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_allclose(a[name], b[name], rtol=1e-6, atol=1e-7, err_msg=name)


class TestTrainer:
    def test_history_fields_and_checkpoints(self, smoke, volumes, tmp_path):
        history = Trainer(smoke, volumes).run()
        assert [r["step"] for r in history] == [0, 1, 2, 3]
        assert [r["epoch"] for r in history] == [0, 0, 1, 1]
        assert all(set(STEP_FIELDS) <= set(r) for r in history)
        assert all(np.isfinite(r["loss"]) for r in history)
        assert sorted(p.name for p in (tmp_path / "checkpoints").glob("*.json")) == [
            "step_000002.json",
            "step_000004.json",
        ]

    def test_same_seed_same_run(self, smoke, volumes):
        a, b = Trainer(smoke, volumes), Trainer(smoke, volumes)
        a.run(2)
        b.run(2)
        assert_same_params(params_of(a), params_of(b))

    def test_resume_matches_an_uninterrupted_run(self, smoke, volumes, tmp_path):
        full = Trainer(smoke, volumes)
        full.run(4)

        first = smoke.model_copy(
            update={"train": smoke.train.model_copy(update={"checkpoint_dir": str(tmp_path / "split")})}
        )
        Trainer(first, volumes).run(2)
        resumed = Trainer(first, volumes)
        checkpoint = latest_checkpoint(tmp_path / "split")
        assert checkpoint is not None
        resumed.resume(checkpoint)
        assert resumed.state.step == 2
        history = resumed.run(4)
        assert [r["step"] for r in history] == [2, 3]
        assert_same_params(params_of(full), params_of(resumed))

    def test_prefetch_does_not_change_the_run(self, smoke, volumes):
        plain = Trainer(smoke, volumes)
        plain.run(3)
        queued = smoke.model_copy(update={"train": smoke.train.model_copy(update={"prefetch": 2})})
        prefetched = Trainer(queued, volumes)
        prefetched.run(3)
        assert_same_params(params_of(plain), params_of(prefetched))

    def test_step_log_is_json_lines(self, smoke, volumes, tmp_path):
        log_file = tmp_path / "logs" / "steps.jsonl"
        train = smoke.train.model_copy(update={"log_file": str(log_file)})
        config = smoke.model_copy(update={"train": train})
        history = Trainer(config, volumes).run(2)
        lines = [json.loads(line) for line in log_file.read_text().splitlines()]
        assert len(lines) == 2
        extra = lines[1]["record"]["extra"]
        assert extra["step"] == 1
        assert extra["loss"] == pytest.approx(history[1]["loss"])

    def test_evaluate_records_pads_odd_volumes(self, smoke):
        trainer = Trainer(smoke, gen_synthetic(1, 8, seed=0))
        odd = gen_synthetic(1, 7, seed=3)
        report = evaluate_records(trainer.model, odd, checkpoint="none")
        assert [c.case_id for c in report.cases] == ["case_000"]
        assert set(report.mean) == {"dice", "iou", "precision", "recall", "vs"}


def test_pad_to_multiple():
    assert pad_to_multiple(np.zeros((7, 8, 5)), 4).shape == (8, 8, 8)
    image = np.ones((4, 4, 4))
    assert pad_to_multiple(image, 4) is image


def test_prefetcher_yields_the_step_batches(smoke, volumes):
    cfg = smoke.train.model_copy(update={"prefetch": 1})
    with PatchPrefetcher(volumes, cfg, 3, 6) as prefetcher:
        for step in range(3, 6):
            images, labels = prefetcher.get(step)
            expected_images, expected_labels = batch_for_step(volumes, cfg, step)
            np.testing.assert_array_equal(images, expected_images)
            np.testing.assert_array_equal(labels, expected_labels)


@pytest.mark.slow
@pytest.mark.parametrize("fr_weight", [5.0, 0.0])
def test_reference_network_overfits_held_in_phantoms(fr_weight, tmp_path):
    """hcma_ref as shipped fits its four held-in phantoms within 300 steps, with and without the feature loss."""
    base = load_config(CONFIGS / "hcma_ref.yaml")
    assert (base.train.lr, base.train.batch_size, base.train.patch_extent, base.train.steps) == (1e-4, 2, 32, 300)
    data = base.data
    volumes = gen_synthetic(data.synthetic_count, data.extent, data.seed, data.difficulty)
    assert len(volumes) == 4

    train = base.train.model_copy(
        update={"checkpoint_dir": str(tmp_path / "checkpoints"), "log_file": None, "checkpoint_every": 300}
    )
    loss = base.loss.model_copy(update={"fr_weight": fr_weight})
    trainer = Trainer(base.model_copy(update={"train": train, "loss": loss}), volumes)
    trainer.run()
    report = evaluate_records(trainer.model, volumes)
    assert report.mean["dice"] >= 0.95


@pytest.mark.slow
def test_long_smoke_run_stays_finite(smoke, volumes):
    train = smoke.train.model_copy(update={"steps": 500, "checkpoint_every": 500})
    config = smoke.model_copy(update={"train": train})
    history = Trainer(config, volumes).run()
    assert len(history) == 500


@pytest.mark.slow
def test_reference_network_stays_finite_on_noisy_volumes(tmp_path):
    base = load_config(CONFIGS / "hcma_ref.yaml")
    volumes = gen_synthetic(2, 32, seed=11, difficulty=1.0)
    train = base.train.model_copy(
        update={"steps": 100, "checkpoint_every": 100, "checkpoint_dir": str(tmp_path), "log_file": None}
    )
    trainer = Trainer(base.model_copy(update={"train": train}), volumes)
    history = trainer.run()
    assert len(history) == 100
    assert all(np.isfinite(r["loss"]) for r in history)
    assert all(np.isfinite(p).all() for p in params_of(trainer).values())
