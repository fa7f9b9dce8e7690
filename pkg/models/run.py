import math
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.ablation import AblationVariant, default_variants
from models.features import FittedPipeline, PipelineConfig
from models.gbdt import GbdtModel, TrainConfig
from models.schema import DatasetSchema
from models.stats import CalibrationTable, ChiSqResult, CompositionRow, RecallCurve, ScoreHistogram

BUNDLE_FORMAT_VERSION = 1


class PoolingConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_pools: int = 10
    top_fraction: float = 0.57
    top_k: Optional[int] = None
    bottom_fraction: float = 0.2
    bottom_k: Optional[int] = None
    level: float = 0.95
    histogram_bins: int = 50

    @field_validator("top_fraction", "bottom_fraction")
    def check_fraction(cls, v, info):
        if not 0 < v <= 1:
            raise ValueError(f"{info.field_name} must lie in (0, 1]")
        return v

    @field_validator("n_pools", "histogram_bins")
    def check_positive(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1")
        return v

    @field_validator("level")
    def check_level(cls, v):
        if not 0 < v < 1:
            raise ValueError("level must lie in (0, 1)")
        return v

    def top_size(self, n: int) -> int:
        return self.top_k if self.top_k is not None else int(math.floor(n * self.top_fraction + 0.5))

    def bottom_size(self, n: int) -> int:
        return self.bottom_k if self.bottom_k is not None else int(math.floor(n * self.bottom_fraction + 0.5))


class RunConfig(BaseModel):
    """One triage run: where the data lives, how to split, featurize, train, pool and report"""
    model_config = ConfigDict(frozen=True)

    data_path: Path
    schema_path: Path
    output_dir: Optional[Path] = None
    seed: int = 0
    test_fraction: float = 0.2
    drop_duplicates: bool = True
    exclusions: Dict[str, List[str]] = Field(default_factory=dict)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    pooling: PoolingConfig = Field(default_factory=PoolingConfig)
    report_groups: List[str] = Field(default_factory=list)
    baseline_score_column: Optional[str] = None
    baseline_exclude_groups: List[str] = Field(default_factory=lambda: ["standardized_tests"])
    variants: List[AblationVariant] = Field(default_factory=default_variants)

    @field_validator("test_fraction")
    def check_fraction(cls, v):
        if not 0 < v < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        return v

    @model_validator(mode="after")
    def check_variants(self):
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError("variant names must be unique")
        return self

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "RunConfig":
        """Load a run config; relative paths resolve against the config file's directory"""
        path = Path(path)
        try:
            document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"{path}: invalid run config: {e}") from e
        if not isinstance(document, dict):
            raise ValueError(f"{path}: run config must be a mapping")
        for key in ("data_path", "schema_path", "output_dir"):
            value = document.get(key)
            if value is not None and not Path(value).is_absolute():
                document[key] = str(path.parent / value)
        return cls.model_validate(document)

    def with_seed(self, seed: int) -> "RunConfig":
        """Same run with one seed driving both the split and the model"""
        return self.model_copy(update={"seed": seed, "train": self.train.model_copy(update={"seed": seed})})

    def check_against(self, schema: DatasetSchema):
        """Every group and column this config names must exist in the schema"""
        named = set(self.report_groups) | set(self.baseline_exclude_groups)
        for variant in self.variants:
            named |= set(variant.exclude_groups) | set(variant.include_groups)
        unknown = named - schema.all_groups
        if unknown:
            raise ValueError(f"unknown group(s): {', '.join(sorted(unknown))}")

        columns = set(self.exclusions)
        if self.baseline_score_column:
            columns.add(self.baseline_score_column)
        missing = columns - set(schema.names)
        if missing:
            raise ValueError(f"unknown column(s): {', '.join(sorted(missing))}")


class BundleMetadata(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    test_fraction: float
    n_train: int
    n_test: int
    train_prevalence: float
    test_prevalence: float
    created_at: datetime
    excluded_groups: List[str] = Field(default_factory=list)
    feature_groups: Dict[str, List[str]] = Field(default_factory=dict)


class ModelBundle(BaseModel):
    """Everything needed to score new applicants without the original config"""
    model_config = ConfigDict(frozen=True)

    format_version: int = BUNDLE_FORMAT_VERSION
    dataset_schema: DatasetSchema
    pipeline: FittedPipeline
    model: GbdtModel
    metadata: BundleMetadata


class CaptureComparison(BaseModel):
    """Admits captured in a size-matched pool by the model and, optionally, the score heuristic"""
    model_config = ConfigDict(frozen=True)

    pool: str
    size: int
    total_admits: int
    model_admits: int
    model_rate: float
    heuristic_admits: Optional[int] = None
    heuristic_rate: Optional[float] = None
    test: Optional[ChiSqResult] = None


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_test: int
    total_admits: int
    recall_curve: RecallCurve
    heuristic_recall_curve: Optional[RecallCurve] = None
    top_capture: CaptureComparison
    bottom_capture: CaptureComparison
    composition: List[CompositionRow] = Field(default_factory=list)
    calibration: CalibrationTable
    subgroup_calibration: List[CalibrationTable] = Field(default_factory=list)
    histogram: ScoreHistogram
