import pytest

import hcma
from models.config import ConfigError, RunConfig, load_config
from tests.conftest import CONFIGS


@pytest.mark.parametrize(
    "name,widths",
    [
        ("hcma_ref.yaml", [16, 32, 64, 128]),
        ("full_scale.yaml", [32, 64, 128, 256]),
        ("dense_block.yaml", [8, 16]),
        ("smoke.yaml", [4, 8]),
        ("mamba3d.yaml", [16, 32, 64, 128]),
    ],
)
def test_shipped_configs_load(name, widths):
    config = load_config(CONFIGS / name)
    assert config.model.stage_widths == widths
    assert config.train.patch_extent % config.model.min_divisor == 0


def test_defaults_are_the_reference_network():
    config = RunConfig()
    assert config.model.stage_widths == [16, 32, 64, 128]
    assert config.model.mism_stages == [2, 3, 4]
    assert config.loss.fr_weight == 5.0
    assert config.loss.num_hard_negatives == 250
    assert config.train.lr == 1e-4


def write(tmp_path, text: str):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    return path


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "model:\n  stage_width: [4, 8]\n"))
    assert info.value.field == "model.stage_width"


def test_bad_value_is_named(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "train:\n  fg_bias: 1.5\n"))
    assert info.value.field == "train.fg_bias"


def test_patch_must_divide_by_the_stage_divisor(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "train:\n  patch_extent: 12\n"))
    assert info.value.field == "train.patch_extent"


def test_synthetic_volumes_must_fit_the_patch(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "train:\n  patch_extent: 64\n"))
    assert info.value.field == "data.extent"


@pytest.mark.parametrize("text", ["model: [1, 2\n", "- 1\n- 2\n"], ids=["syntax", "not-a-mapping"])
def test_unreadable_files(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_empty_file_gives_defaults(tmp_path):
    assert load_config(write(tmp_path, "")).model.num_stages == 4


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("HCMA_SEED", "42")
    assert hcma.load_run_config(str(CONFIGS / "smoke.yaml")).train.seed == 42


@pytest.mark.parametrize("value", ["abc", "-3"])
def test_bad_seed_from_environment(monkeypatch, value):
    monkeypatch.setenv("HCMA_SEED", value)
    with pytest.raises(ConfigError) as info:
        hcma.load_run_config(str(CONFIGS / "smoke.yaml"))
    assert info.value.field == "HCMA_SEED"


def test_mamba3d_variant_drops_the_width_rule(tmp_path):
    text = "model:\n  stage_widths: [6, 10]\n  mism_stages: [2]\n  mism:\n    variant: mamba3d\n"
    config = load_config(write(tmp_path, text))
    config.model.check()
    assert config.model.mism.variant == "mamba3d"
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "model:\n  mism:\n    variant: mamba2d\n"))
