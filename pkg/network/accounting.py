"""Parameter and FLOP accounting.

FLOP convention: one multiply-add is 2 FLOPs; bias adds, elementwise adds and
products cost 1 per element; normalization costs NORM_FLOPS per element plus
AFFINE_FLOPS for its scale-shift; SiLU/sigmoid/softplus cost ACTIVATION_FLOPS
per element, ReLU 1; softmax costs SOFTMAX_FLOPS per element. A scan step
costs SCAN_FLOPS per (channel, state) pair plus 2 per channel for the skip.

The analytic ``*_params`` formulas mirror the block constructors and exist so
tests and the stats report can cross-check ``count_params``.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from network.module import Module, Shape

if TYPE_CHECKING:
    from models.config import MismConfig, NetworkConfig
    from models.reports import BlockCost

NORM_FLOPS = 5
AFFINE_FLOPS = 2
ACTIVATION_FLOPS = 4
SOFTMAX_FLOPS = 5
SCAN_FLOPS = 8


def conv_flops(fan_in: int, out_channels: int, out_positions: int, bias: bool) -> int:
    """2 * fan_in MACs per output element, plus one add per element for the bias."""
    per_position = 2 * fan_in * out_channels + (out_channels if bias else 0)
    return per_position * out_positions


def linear_flops(in_features: int, out_features: int, tokens: int, bias: bool) -> int:
    return conv_flops(in_features, out_features, tokens, bias)


def activation_flops(name: str, elements: int) -> int:
    return (1 if name == "relu" else ACTIVATION_FLOPS) * elements


def count_params(model: Module) -> int:
    """Exact learnable scalar count."""
    return model.num_parameters()


def count_flops(model: Module, input_shape: Shape) -> int:
    """Analytic FLOPs of one forward pass at ``input_shape``."""
    total, _ = model.flops(tuple(input_shape))
    return total


def cost_breakdown(model: Module, input_shape: Shape) -> list[BlockCost]:
    """Per-block params and FLOPs when the model exposes a breakdown, else one row."""
    from models.reports import BlockCost

    breakdown = getattr(model, "cost_breakdown", None)
    if breakdown is not None:
        return breakdown(tuple(input_shape))
    return [BlockCost(name=type(model).__name__, params=count_params(model), flops=count_flops(model, input_shape))]


# -- analytic parameter formulas ---------------------------------------------


def pointwise_params(cin: int, cout: int, bias: bool = True) -> int:
    return cin * cout + (cout if bias else 0)


def depthwise_params(channels: int, kernel_volume: int = 27, bias: bool = True) -> int:
    return channels * kernel_volume + (channels if bias else 0)


def norm_params(channels: int) -> int:
    return 2 * channels


def conv_block_params(cin: int, cout: int) -> int:
    return cin * cout * 27 + norm_params(cout)


def res_block_params(channels: int) -> int:
    # the residual path (average pooling) carries no parameters
    return depthwise_params(channels, bias=False) + norm_params(channels) + pointwise_params(channels, channels)


def dense_block_params(cin: int, cout: int) -> int:
    return depthwise_params(cin) + pointwise_params(2 * cin, cin) + pointwise_params(3 * cin, cout)


def s6_params(d_inner: int, d_state: int) -> int:
    return 3 * d_inner * d_state + pointwise_params(d_inner, d_inner) + d_inner


def vssb_params(channels: int, d_state: int, expansion: int, shared: bool) -> int:
    inner = expansion * channels
    directions = 1 if shared else 4
    return (
        norm_params(channels)
        + 2 * pointwise_params(channels, inner)
        + depthwise_params(inner, kernel_volume=9)
        + directions * s6_params(inner, d_state)
        + norm_params(inner)
        + pointwise_params(inner, channels)
    )


def asa_params(channels: int, out_proj: bool) -> int:
    qkv = 2 * pointwise_params(channels, channels) + pointwise_params(channels, channels, bias=False)
    return qkv + (pointwise_params(channels, channels) if out_proj else 0)


def mamba3d_params(channels: int, d_state: int, expansion: int, shared: bool) -> int:
    inner = expansion * channels
    directions = 1 if shared else 2
    return (
        norm_params(channels)
        + 2 * pointwise_params(channels, inner)
        + depthwise_params(inner)
        + directions * s6_params(inner, d_state)
        + norm_params(inner)
        + pointwise_params(inner, channels)
    )


def mism_params(channels: int, cfg: MismConfig) -> int:
    if cfg.variant == "mamba3d":
        scan = cfg.scan
        return mamba3d_params(channels, scan.d_state, scan.expansion, scan.shared_scan_params)
    if cfg.asymmetric_split:
        shares = (channels // 2, channels // 4, channels // 4)
    else:
        shares = (channels, channels, channels)
    total = 0
    for share in shares:
        if cfg.use_vssb:
            total += vssb_params(share, cfg.scan.d_state, cfg.scan.expansion, cfg.scan.shared_scan_params)
        if cfg.use_asa:
            total += asa_params(share, cfg.attention.out_proj)
    if not cfg.asymmetric_split:
        total += pointwise_params(3 * channels, channels)
    elif cfg.fuse:
        total += pointwise_params(channels, channels)
    return total


def hcma_up_params(low_channels: int, skip_channels: int) -> int:
    transpose = low_channels * skip_channels * 8 + skip_channels
    return transpose + conv_block_params(2 * skip_channels, skip_channels)


def block_params(config: NetworkConfig) -> dict[str, int]:
    """Closed-form parameter count per top-level block, named as in ``cost_breakdown``."""
    w = config.stage_widths
    blocks = {"stem": conv_block_params(config.in_channels, w[0])}
    for i in range(config.num_stages):
        incoming = w[max(i - 1, 0)]
        count = res_block_params(incoming) if i > 0 else 0
        if i + 1 in config.mism_stages:
            count += mism_params(incoming, config.mism)
        blocks[f"stages.{i}"] = count + dense_block_params(incoming, w[i])
    for j, i in enumerate(range(config.num_stages - 1, 0, -1)):
        blocks[f"ups.{j}"] = hcma_up_params(w[i], w[i - 1])
    blocks["out"] = pointwise_params(w[0], config.num_classes)
    return blocks


def network_params(config: NetworkConfig) -> int:
    """Closed-form parameter count of the network described by ``config``."""
    return sum(block_params(config).values())
