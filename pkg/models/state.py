"""Training state model."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class TrainState(BaseModel):
    """Counters and AdamW moment buffers of a training run.

    The moment dictionaries are keyed by parameter name; they are persisted in
    the checkpoint blob, the rest goes to the JSON sidecar.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: int = Field(0, ge=0, description="Optimizer steps taken")
    epoch: int = Field(0, ge=0, description="Completed epochs")
    seed: int = Field(0, ge=0, description="Seed of the patch stream")
    config: dict = Field(default_factory=dict, description="Snapshot of the run config")
    exp_avg: dict[str, np.ndarray] = Field(default_factory=dict, exclude=True)
    exp_avg_sq: dict[str, np.ndarray] = Field(default_factory=dict, exclude=True)

    def check_moments(self, params: dict[str, np.ndarray]) -> None:
        """Raise ValueError when a moment buffer does not shape-match its parameter."""
        for name, buffer in (*self.exp_avg.items(), *self.exp_avg_sq.items()):
            if name not in params:
                raise ValueError(f"moment buffer for unknown parameter {name}")
            if buffer.shape != params[name].shape:
                raise ValueError(f"moment {name} has shape {buffer.shape}, param {params[name].shape}")
