"""The assembled encoder-decoder network."""

from __future__ import annotations

from loguru import logger

from models.config import NetworkConfig
from models.reports import BlockCost
from network.blocks import ConvBlock, DenseBlock, HCMAUp, HybridBlock, OutBlock, ResBlock
from network.module import Module, Shape
from tensor.random import Rng
from tensor.tensor import ShapeError, Tensor


class EncoderStage(Module):
    """Optional Res Block downsampling, then a Hybrid or Dense Block."""

    def __init__(self, index: int, config: NetworkConfig, rng: Rng):
        widths = config.stage_widths
        incoming = widths[max(index - 1, 0)]
        self.down = ResBlock(incoming, rng, config.activation, config.norm_eps) if index > 0 else None
        if index + 1 in config.mism_stages:
            self.body: Module = HybridBlock(incoming, widths[index], config.mism, rng, config.norm_eps)
        else:
            self.body = DenseBlock(incoming, widths[index], rng)

    def forward(self, x: Tensor) -> Tensor:
        if self.down is not None:
            x = self.down(x)
        return self.body(x)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        count = 0
        if self.down is not None:
            count, shape = self.down.flops(shape)
        body, out = self.body.flops(shape)
        return count + body, out


class HCMAUNet(Module):
    """Stem, encoder stages, HCMA-Up decoder and Out Block.

    ``forward`` returns the class logits and the last decoder feature map, which
    the feature loss consumes.
    """

    def __init__(self, config: NetworkConfig, rng: Rng):
        self.config = config
        w = config.stage_widths
        self.stem = ConvBlock(config.in_channels, w[0], rng, config.activation, config.norm_eps)
        self.stages = [EncoderStage(i, config, rng) for i in range(config.num_stages)]
        self.ups = [
            HCMAUp(w[i], w[i - 1], rng, config.activation, config.norm_eps)
            for i in range(config.num_stages - 1, 0, -1)
        ]
        self.out = OutBlock(w[0], config.num_classes, rng)

    def check_input(self, shape: Shape) -> None:
        if len(shape) != 5 or shape[1] != self.config.in_channels:
            raise ShapeError(f"expected (B, {self.config.in_channels}, D, H, W), got {shape}")
        divisor = self.config.min_divisor
        if any(extent % divisor for extent in shape[2:]):
            raise ShapeError(f"spatial extents {shape[2:]} must be divisible by {divisor}")

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        self.check_input(x.shape)
        h = self.stem(x)
        skips = []
        for stage in self.stages:
            h = stage(h)
            skips.append(h)
        for up, skip in zip(self.ups, reversed(skips[:-1])):
            h = up(h, skip)
        return self.out(h), h

    def cost_breakdown(self, shape: Shape) -> list[BlockCost]:
        """Params and FLOPs per top-level block, in execution order."""
        self.check_input(shape)
        rows = []

        def record(name: str, block: Module, count: int) -> None:
            rows.append(BlockCost(name=name, params=block.num_parameters(), flops=count))

        count, shape = self.stem.flops(shape)
        record("stem", self.stem, count)
        skip_shapes = []
        for i, stage in enumerate(self.stages):
            count, shape = stage.flops(shape)
            record(f"stages.{i}", stage, count)
            skip_shapes.append(shape)
        for j, (up, skip) in enumerate(zip(self.ups, reversed(skip_shapes[:-1]))):
            count, shape = up.flops(shape)
            assert shape == skip
            record(f"ups.{j}", up, count)
        count, _ = self.out.flops(shape)
        record("out", self.out, count)
        return rows

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        total = sum(row.flops for row in self.cost_breakdown(shape))
        return total, (shape[0], self.config.num_classes, *shape[2:])


def build(config: NetworkConfig, seed: int = 0) -> HCMAUNet:
    """Validate ``config`` and construct the network with weights drawn from ``seed``.

    Raises:
        ConfigError: When the config breaks a layout invariant
    """
    config.check()
    model = HCMAUNet(config, Rng(seed))
    logger.info(
        f"Built network: widths={config.stage_widths}, mism_stages={config.mism_stages}, "
        f"params={model.num_parameters()}"
    )
    return model
