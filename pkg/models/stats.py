from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.pools import PoolSummary


class ChiSqResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    chi2: float
    df: int = 1
    z: float
    p_two_sided: float
    p_one_sided: float


class ExactInterval(BaseModel):
    model_config = ConfigDict(frozen=True)

    low: float
    high: float
    level: float = 0.95

    @model_validator(mode="after")
    def check_order(self):
        if not 0.0 <= self.low <= self.high <= 1.0:
            raise ValueError(f"invalid interval ({self.low}, {self.high})")
        return self


class CorrelationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: float
    df: int
    p_value: float


class RecallCurve(BaseModel):
    """captured[k-1] is the share of all positives among the top-k scored rows"""
    model_config = ConfigDict(frozen=True)

    k: List[int]
    captured: List[float]
    total_positives: int


class CompositionRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    pool: str
    size: int
    fractions: Dict[str, float] = Field(default_factory=dict)


class ScoreHistogram(BaseModel):
    model_config = ConfigDict(frozen=True)

    edges: List[float]
    counts_denied: List[int]
    counts_admitted: List[int]
    density_denied: List[float]
    density_admitted: List[float]

    @property
    def bins(self) -> int:
        return len(self.edges) - 1


class CalibrationTable(BaseModel):
    """Per-pool predicted vs actual rates plus their correlation across pools"""
    model_config = ConfigDict(frozen=True)

    group: Optional[str] = None
    rows: List[PoolSummary]
    correlation: Optional[CorrelationResult] = None
