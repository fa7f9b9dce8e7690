import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.schema import RawDataset


class NumericFeatureSpec(BaseModel):
    """Displayed value loc + scale*z clipped to [low, high]; z enters the latent score with weight"""
    model_config = ConfigDict(frozen=True)

    name: str
    weight: float = 0.0
    loc: float = 0.0
    scale: float = 1.0
    low: Optional[float] = None
    high: Optional[float] = None
    decimals: int = 2
    missing_rate: float = 0.0
    groups: List[str] = Field(default_factory=list)


class CategoricalFeatureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    levels: List[str]
    probabilities: Optional[List[float]] = None
    effects: Optional[List[float]] = None
    missing_rate: float = 0.0
    groups: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_levels(self):
        if not self.levels:
            raise ValueError(f"categorical spec {self.name} has no levels")
        for field in ("probabilities", "effects"):
            values = getattr(self, field)
            if values is not None and len(values) != len(self.levels):
                raise ValueError(f"categorical spec {self.name}: {field} must match the {len(self.levels)} levels")
        if self.probabilities is not None:
            if any(p < 0 for p in self.probabilities) or not math.isclose(sum(self.probabilities), 1.0, abs_tol=1e-9):
                raise ValueError(f"categorical spec {self.name}: probabilities must be non-negative and sum to 1")
        return self

    @property
    def level_effects(self) -> List[float]:
        return self.effects if self.effects is not None else [0.0] * len(self.levels)


class TextFeatureSpec(BaseModel):
    """Each token is drawn from signal_terms with probability sigmoid(logit(base_signal_rate) + weight*u)"""
    model_config = ConfigDict(frozen=True)

    name: str
    signal_terms: List[str]
    neutral_terms: List[str]
    weight: float = 0.0
    base_signal_rate: float = 0.2
    tokens_per_doc: Tuple[int, int] = (3, 10)
    groups: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_terms(self):
        if not self.signal_terms or not self.neutral_terms:
            raise ValueError(f"text spec {self.name} needs signal and neutral terms")
        if not 0 < self.base_signal_rate < 1:
            raise ValueError(f"text spec {self.name}: base_signal_rate must lie in (0, 1)")
        if not 0 <= self.tokens_per_doc[0] <= self.tokens_per_doc[1]:
            raise ValueError(f"text spec {self.name}: invalid tokens_per_doc {self.tokens_per_doc}")
        return self


class ProxyScoreSpec(BaseModel):
    """Test-score-like column: offset + scale*(u + noise_std*eps), clipped and rounded to step"""
    model_config = ConfigDict(frozen=True)

    name: str = "sat_total"
    scale: float = 110.0
    offset: float = 1250.0
    noise_std: float = 2.0
    low: float = 400.0
    high: float = 1600.0
    step: float = 10.0
    missing_rate: float = 0.0
    groups: List[str] = Field(default_factory=lambda: ["standardized_tests"])

    @field_validator("step")
    def check_step(cls, v):
        if v <= 0:
            raise ValueError("step must be positive")
        return v


def _default_numeric() -> List[NumericFeatureSpec]:
    return [
        NumericFeatureSpec(name="gpa", weight=1.0, loc=3.5, scale=0.3, low=0.0, high=4.0),
        NumericFeatureSpec(name="class_rank_pct", weight=0.6, loc=80, scale=12, low=1, high=100, decimals=0,
                           missing_rate=0.3),
        NumericFeatureSpec(name="ap_count", weight=0.5, loc=5, scale=2.5, low=0, high=15, decimals=0),
        NumericFeatureSpec(name="recommendation_rating", weight=0.8, loc=3, scale=0.8, low=1, high=5, decimals=0),
        NumericFeatureSpec(name="family_income_decile", weight=0.2, loc=5.5, scale=2.5, low=1, high=10, decimals=0,
                           missing_rate=0.1, groups=["sensitive"]),
        NumericFeatureSpec(name="sat_subject_math", weight=0.3, loc=680, scale=70, low=200, high=800, decimals=0,
                           missing_rate=0.7, groups=["sat_subject"]),
        NumericFeatureSpec(name="toefl", loc=100, scale=10, low=0, high=120, decimals=0, missing_rate=0.85,
                           groups=["standardized_tests"]),
    ]


def _default_categorical() -> List[CategoricalFeatureSpec]:
    binary = ["0", "1"]
    return [
        CategoricalFeatureSpec(name="region", levels=["northeast", "south", "midwest", "west", "international"],
                               probabilities=[0.3, 0.25, 0.2, 0.2, 0.05], effects=[0.1, 0.0, 0.0, 0.1, -0.1],
                               groups=["sensitive"]),
        CategoricalFeatureSpec(name="school_type", levels=["public", "private", "charter", "homeschool"],
                               probabilities=[0.7, 0.22, 0.06, 0.02], effects=[0.0, 0.2, 0.0, 0.1],
                               missing_rate=0.02),
        CategoricalFeatureSpec(name="intended_major",
                               levels=["engineering", "business", "humanities", "sciences", "undecided"],
                               effects=[0.1, 0.0, 0.1, 0.1, -0.1]),
        CategoricalFeatureSpec(name="application_round", levels=["RD", "ED"], probabilities=[0.8, 0.2],
                               effects=[0.0, 0.5]),
        CategoricalFeatureSpec(name="race", levels=["asian", "black", "hispanic", "white", "multiracial", "other"],
                               probabilities=[0.2, 0.12, 0.15, 0.43, 0.07, 0.03], missing_rate=0.05,
                               groups=["sensitive"]),
        CategoricalFeatureSpec(name="female", levels=binary, probabilities=[0.45, 0.55], effects=[0.0, 0.1],
                               groups=["sensitive", "female"]),
        CategoricalFeatureSpec(name="urm", levels=binary, probabilities=[0.8, 0.2], effects=[0.0, 0.2],
                               groups=["sensitive", "urm"]),
        CategoricalFeatureSpec(name="first_gen", levels=binary, probabilities=[0.8, 0.2], effects=[0.0, 0.1],
                               groups=["sensitive"]),
        CategoricalFeatureSpec(name="legacy", levels=binary, probabilities=[0.93, 0.07], effects=[0.0, 0.6],
                               groups=["legacy"]),
        CategoricalFeatureSpec(name="recruited_athlete", levels=["N", "Y"], probabilities=[0.97, 0.03]),
    ]


def _default_text() -> List[TextFeatureSpec]:
    return [
        TextFeatureSpec(
            name="activities",
            signal_terms=["debate", "robotics", "research", "olympiad", "captain", "founder", "orchestra", "volunteer"],
            neutral_terms=["club", "member", "team", "band", "sports", "student", "council", "chess", "choir",
                           "tutoring"],
            weight=0.8,
            tokens_per_doc=(4, 12),
        ),
        TextFeatureSpec(
            name="honors",
            signal_terms=["national", "merit", "finalist", "scholar", "gold", "winner"],
            neutral_terms=["honor", "roll", "school", "certificate", "participation", "local"],
            weight=0.8,
            tokens_per_doc=(0, 6),
        ),
    ]


def _default_proxies() -> List[ProxyScoreSpec]:
    return [
        ProxyScoreSpec(),
        ProxyScoreSpec(name="act_composite", scale=3.0, offset=27.0, low=1, high=36, step=1, missing_rate=0.5),
    ]


class GeneratorConfig(BaseModel):
    """Logistic ground truth over a latent applicant strength score"""
    model_config = ConfigDict(frozen=True)

    n_rows: int = 10000
    base_admit_rate: float = 0.115
    numeric: List[NumericFeatureSpec] = Field(default_factory=_default_numeric)
    categorical: List[CategoricalFeatureSpec] = Field(default_factory=_default_categorical)
    text: List[TextFeatureSpec] = Field(default_factory=_default_text)
    proxy_scores: List[ProxyScoreSpec] = Field(default_factory=_default_proxies)
    latent_noise_std: float = 0.5
    label_temperature: float = 1.0
    id_column: str = "applicant_id"
    outcome_column: str = "decision"
    seed: int = 0

    @field_validator("n_rows")
    def check_rows(cls, v):
        if v < 1:
            raise ValueError("n_rows must be at least 1")
        return v

    @field_validator("base_admit_rate")
    def check_rate(cls, v):
        if not 0 < v < 1:
            raise ValueError("base_admit_rate must lie in (0, 1)")
        return v

    @field_validator("label_temperature")
    def check_temperature(cls, v):
        if not v > 0:
            raise ValueError("label_temperature must be positive")
        return v

    @model_validator(mode="after")
    def check_specs(self):
        names = [self.id_column, self.outcome_column]
        names += [s.name for s in self.numeric] + [s.name for s in self.categorical]
        names += [s.name for s in self.text] + [s.name for s in self.proxy_scores]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate column name(s): {', '.join(duplicates)}")

        weights = [s.weight for s in self.numeric] + [s.weight for s in self.text]
        weights += [e for s in self.categorical for e in s.level_effects]
        weights += [self.latent_noise_std] + [s.scale for s in self.proxy_scores] + [s.noise_std for s in self.proxy_scores]
        if not all(math.isfinite(w) for w in weights):
            raise ValueError("weights must be finite")

        rates = [s.missing_rate for s in self.numeric] + [s.missing_rate for s in self.categorical]
        rates += [s.missing_rate for s in self.proxy_scores]
        if any(not 0 <= r < 1 for r in rates):
            raise ValueError("missing rates must lie in [0, 1)")
        return self


class SyntheticDataset(BaseModel):
    """Generated rows with the ground truth behind them"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    data: RawDataset
    labels: np.ndarray
    latent: np.ndarray
    admit_probability: np.ndarray
    intercept: float
