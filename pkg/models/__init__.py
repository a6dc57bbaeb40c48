"""Data models: configuration, volumes, training state and reports."""

from .config import (
    AttentionConfig,
    ConfigError,
    DataConfig,
    LossConfig,
    MismConfig,
    NetworkConfig,
    RunConfig,
    ScanConfig,
    TrainConfig,
    load_config,
)
from .reports import BlockCost, CaseMetrics, MetricsReport, StatsReport, SuiteResult
from .state import TrainState
from .volume import VolumeRecord, VoxelMask

__all__ = [
    "AttentionConfig",
    "BlockCost",
    "CaseMetrics",
    "ConfigError",
    "DataConfig",
    "LossConfig",
    "MetricsReport",
    "MismConfig",
    "NetworkConfig",
    "RunConfig",
    "ScanConfig",
    "StatsReport",
    "SuiteResult",
    "TrainConfig",
    "TrainState",
    "VolumeRecord",
    "VoxelMask",
    "load_config",
]
