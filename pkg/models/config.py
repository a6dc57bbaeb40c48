"""Run configuration models and the YAML loader."""

from pathlib import Path
from typing import Literal

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError


class ConfigError(ValueError):
    """Raised when a configuration violates an invariant; the message names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ScanConfig(_Strict):
    """Selective-scan hyperparameters of the VSSB."""

    d_state: int = Field(16, ge=1, description="State size per scanned channel")
    expansion: int = Field(2, ge=1, description="Channel expansion factor E inside the VSSB")
    shared_scan_params: bool = Field(
        False, description="Share one S6 parameter set across the scan directions"
    )


class AttentionConfig(_Strict):
    """Axial self-attention options."""

    out_proj: bool = Field(False, description="Apply a pointwise output projection after attention")
    residual: bool = Field(True, description="Add the input back onto the attention result")


class MismConfig(_Strict):
    """Multi-view module options, including the ablation axes."""

    variant: Literal["mism", "mamba3d"] = Field(
        "mism",
        description="mism: multi-view module; mamba3d: one bidirectional scan over the flattened volume "
        "in its place (the view, split and attention options are then unused)",
    )
    use_vssb: bool = Field(True, description="Run the VSSB over each view's slices")
    use_asa: bool = Field(True, description="Run axial self-attention along each view's normal")
    asymmetric_split: bool = Field(
        True, description="Split channels 50/25/25 across views; false feeds every view all channels"
    )
    fuse: bool = Field(True, description="Pointwise fuse convolution after the view concat")
    residual: bool = Field(True, description="Residual add around the fused output")
    scan: ScanConfig = Field(default_factory=ScanConfig)
    attention: AttentionConfig = Field(default_factory=AttentionConfig)


class NetworkConfig(_Strict):
    """Stage layout and block options of the segmentation network."""

    in_channels: int = Field(1, ge=1, description="Input channels (1 for a single MRI sequence)")
    num_classes: int = Field(2, ge=2, description="Output classes (background + lesion)")
    stage_widths: list[int] = Field(
        default_factory=lambda: [16, 32, 64, 128], description="Channel width per encoder stage"
    )
    mism_stages: list[int] = Field(
        default_factory=lambda: [2, 3, 4], description="1-based stages that carry a Hybrid Block"
    )
    activation: Literal["silu", "relu"] = Field("silu", description="Activation inside conv blocks")
    norm_eps: float = Field(1e-5, gt=0, description="Epsilon of every normalization layer")
    mism: MismConfig = Field(default_factory=MismConfig)

    @property
    def num_stages(self) -> int:
        return len(self.stage_widths)

    @property
    def min_divisor(self) -> int:
        """Spatial extents must be multiples of this."""
        return 2 ** (self.num_stages - 1)

    def check(self) -> None:
        """Validate cross-field invariants, raising ConfigError naming the field."""
        if self.num_stages < 2:
            raise ConfigError("model.stage_widths", f"need at least 2 stages, got {self.num_stages}")
        for i, width in enumerate(self.stage_widths):
            if width < 1:
                raise ConfigError(f"model.stage_widths[{i}]", f"width must be positive, got {width}")
        for stage in self.mism_stages:
            if not 1 <= stage <= self.num_stages:
                raise ConfigError("model.mism_stages", f"stage {stage} outside 1..{self.num_stages}")
            if self.mism.variant != "mism":
                continue
            # the MISM runs on the incoming width, the Dense Block emits the stage width
            for i in sorted({max(stage - 2, 0), stage - 1}):
                if self.stage_widths[i] % 4:
                    raise ConfigError(
                        f"model.stage_widths[{i}]",
                        f"width {self.stage_widths[i]} at a Hybrid stage must be divisible by 4",
                    )


class LossConfig(_Strict):
    """Dice/CE weights and the region-aware feature loss."""

    boundary_iterations: int = Field(
        10, ge=0, description="Dilation steps that grow the foreground into the boundary region"
    )
    negative_iterations: int = Field(
        10, ge=0, description="Dilation steps that grow mined negatives into the hard region"
    )
    num_hard_negatives: int = Field(250, ge=1, description="Negatives mined by similarity rank")
    fr_weight: float = Field(5.0, ge=0, description="Weight of the feature loss in the total")
    eps: float = Field(1e-8, gt=0, description="Floor for cosine and Dice denominators")
    fp_grad: bool = Field(True, description="Let gradients flow through the foreground center")
    use_pos: bool = Field(True, description="Include the positive compactness term")
    use_boundary: bool = Field(True, description="Include the boundary term")
    use_neg: bool = Field(True, description="Include the hard-negative term")
    ce_weight: float = Field(1.0, ge=0, description="Weight of cross-entropy")
    dice_weight: float = Field(1.0, ge=0, description="Weight of soft Dice")


class TrainConfig(_Strict):
    """Optimizer, sampling and checkpoint settings."""

    seed: int = Field(0, ge=0, description="Seed for weights and the patch stream")
    dtype: Literal["float32", "float64"] = Field("float32", description="Training element type")
    steps: int = Field(300, ge=1, description="Optimizer steps to run")
    steps_per_epoch: int = Field(50, ge=1, description="Steps counted as one epoch")
    batch_size: int = Field(2, ge=1)
    patch_extent: int = Field(32, ge=1, description="Cubic patch side in voxels")
    fg_bias: float = Field(0.5, ge=0, le=1, description="Probability of centering a patch on foreground")
    lr: float = Field(1e-4, gt=0)
    betas: tuple[float, float] = Field((0.9, 0.999))
    eps: float = Field(1e-8, gt=0)
    weight_decay: float = Field(0.01, ge=0)
    checkpoint_every: int = Field(100, ge=1, description="Steps between checkpoints")
    checkpoint_dir: str = Field("runs/checkpoints", description="Where checkpoints are written")
    log_file: str | None = Field(None, description="Optional JSON-lines step log")
    prefetch: int = Field(0, ge=0, description="Bounded prefetch queue depth; 0 disables the worker")


class DataConfig(_Strict):
    """Where volumes come from."""

    root: str | None = Field(None, description="Dataset directory written by gen-data; None = synthesize")
    synthetic_count: int = Field(4, ge=1, description="Volumes to synthesize when root is None")
    extent: int = Field(32, ge=1, description="Side of synthesized volumes")
    difficulty: float = Field(0.0, ge=0, le=1, description="0 = noiseless max contrast")
    seed: int = Field(0, ge=0, description="Seed of the synthesized set")


class RunConfig(_Strict):
    """Top-level configuration file schema."""

    model: NetworkConfig = Field(default_factory=NetworkConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    def check(self) -> None:
        self.model.check()
        divisor = self.model.min_divisor
        if self.train.patch_extent % divisor:
            raise ConfigError(
                "train.patch_extent", f"{self.train.patch_extent} is not divisible by {divisor}"
            )
        if self.data.root is None and self.data.extent < self.train.patch_extent:
            raise ConfigError("data.extent", "synthesized volumes are smaller than the patch")


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a YAML run configuration.

    Raises:
        ConfigError: On unreadable files, unknown keys, bad values or broken invariants
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(str(path), f"cannot read config: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigError(field, first["msg"]) from e
    config.check()
    logger.info(f"Loaded config {path} ({config.model.num_stages} stages)")
    return config
