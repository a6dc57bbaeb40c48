"""Report records emitted by eval, stats and verify."""

from pydantic import BaseModel, Field


class CaseMetrics(BaseModel):
    """Overlap metrics of one evaluated case."""

    case_id: str
    dice: float = Field(..., ge=0, le=1)
    iou: float = Field(..., ge=0, le=1)
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    vs: float = Field(..., ge=0, le=1, description="Volumetric similarity")


class MetricsReport(BaseModel):
    """Per-case metrics plus their means."""

    checkpoint: str | None = None
    cases: list[CaseMetrics] = Field(default_factory=list)
    mean: dict[str, float] = Field(default_factory=dict)


class BlockCost(BaseModel):
    """Parameter and FLOP cost of one named block."""

    name: str
    params: int = Field(..., ge=0)
    flops: int = Field(..., ge=0)


class StatsReport(BaseModel):
    """Model size and compute for a given input shape."""

    input_shape: tuple[int, ...]
    params: int = Field(..., ge=0)
    flops: int = Field(..., ge=0)
    blocks: list[BlockCost] = Field(default_factory=list)
    reference_mparams: float = Field(2.87, description="Published parameter count, millions")
    reference_gflops: float = Field(126.44, description="Published compute, GFLOPs")

    @property
    def mparams(self) -> float:
        return self.params / 1e6

    @property
    def gflops(self) -> float:
        return self.flops / 1e9


class SuiteResult(BaseModel):
    """Outcome of one verification suite."""

    name: str
    cases: int = Field(..., ge=0)
    failures: list[str] = Field(default_factory=list)
    max_error: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures
