from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.stats import ChiSqResult, RecallCurve


class AblationVariant(BaseModel):
    """A baseline refit with feature groups removed (exclude) or restored (include)"""
    model_config = ConfigDict(frozen=True)

    name: str
    exclude_groups: List[str] = Field(default_factory=list)
    include_groups: List[str] = Field(default_factory=list)

    @field_validator("exclude_groups", "include_groups")
    def normalize_groups(cls, v):
        return sorted(set(v))

    @model_validator(mode="after")
    def check_disjoint(self):
        both = set(self.exclude_groups) & set(self.include_groups)
        if both:
            raise ValueError(f"variant {self.name}: groups both excluded and included: {', '.join(sorted(both))}")
        return self


def default_variants() -> List[AblationVariant]:
    return [
        AblationVariant(name="baseline"),
        AblationVariant(name="remove_sat_subject", exclude_groups=["sat_subject"]),
        AblationVariant(name="add_standardized_tests", include_groups=["standardized_tests"]),
        AblationVariant(name="remove_sensitive", exclude_groups=["sensitive"]),
    ]


class VariantResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    exclude_groups: List[str]
    include_groups: List[str]
    n_features_used: int
    admits_captured: int
    capture_rate: float
    composition: Dict[str, float] = Field(default_factory=dict)
    # Against the first (baseline) variant; None for the baseline itself or when undefined
    capture_test: Optional[ChiSqResult] = None
    composition_tests: Dict[str, ChiSqResult] = Field(default_factory=dict)
    recall_curve: RecallCurve


class ReferenceRow(BaseModel):
    """Context rows for the comparison table: the applicant pool and the score-heuristic pool"""
    model_config = ConfigDict(frozen=True)

    label: str
    size: int
    admits_captured: Optional[int] = None
    capture_rate: Optional[float] = None
    composition: Dict[str, float] = Field(default_factory=dict)


class AblationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    n_test: int
    total_admits: int
    report_groups: List[str] = Field(default_factory=list)
    variants: List[VariantResult]
    reference_rows: List[ReferenceRow] = Field(default_factory=list)

    @property
    def baseline(self) -> VariantResult:
        return self.variants[0]

    def variant(self, name: str) -> VariantResult:
        for v in self.variants:
            if v.name == name:
                return v
        raise ValueError(f"unknown variant: {name}")
