from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.schema import DatasetSchema

RARE = "RARE"
MISSING = "MISSING"

# Boolean vector over FeatureMatrix columns; True keeps the column
FeatureMask = np.ndarray


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    MISSING_INDICATOR = "missing_indicator"
    ONEHOT = "onehot"
    TFIDF = "tfidf"


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    rare_threshold: float = 0.01
    tfidf_max_features_per_column: int = 256
    tfidf_ngram_range: Tuple[int, int] = (1, 2)
    numeric_placeholder: Optional[float] = None

    @field_validator("rare_threshold")
    def check_threshold(cls, v):
        if not 0 < v < 1:
            raise ValueError("rare_threshold must lie in (0, 1)")
        return v

    @field_validator("tfidf_max_features_per_column")
    def check_max_features(cls, v):
        if v < 1:
            raise ValueError("tfidf_max_features_per_column must be at least 1")
        return v

    @field_validator("tfidf_ngram_range")
    def check_ngrams(cls, v):
        if not 1 <= v[0] <= v[1] <= 2:
            raise ValueError("tfidf_ngram_range must be within (1, 2)")
        return v


class NumericEncoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    column: str
    placeholder: float
    has_indicator: bool


class CategoricalEncoding(BaseModel):
    """Retained categories in output order; RARE is always the last output column"""
    model_config = ConfigDict(frozen=True)

    column: str
    vocabulary: List[str]
    rare: List[str] = Field(default_factory=list)

    @property
    def outputs(self) -> List[str]:
        return self.vocabulary + [RARE]


class TextEncoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    column: str
    terms: List[str]
    idf: List[float]

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.terms) != len(self.idf):
            raise ValueError(f"text column {self.column}: {len(self.terms)} terms but {len(self.idf)} idf weights")
        return self


class FeatureColumn(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    source: str
    kind: FeatureKind
    label: Optional[str] = None
    groups: List[str] = Field(default_factory=list)


class FittedPipeline(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset_schema: DatasetSchema
    config: PipelineConfig
    numeric: List[NumericEncoding]
    categorical: List[CategoricalEncoding]
    text: List[TextEncoding]
    columns: List[FeatureColumn]

    @property
    def n_columns(self) -> int:
        return len(self.columns)


class FeatureMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    columns: List[FeatureColumn]

    @model_validator(mode="after")
    def check_shape(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match {len(self.columns)} column descriptors"
            )
        return self

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def columns_of_kind(self, kind: FeatureKind) -> List[int]:
        return [i for i, c in enumerate(self.columns) if c.kind == kind]

    def columns_from(self, source: str) -> List[int]:
        return [i for i, c in enumerate(self.columns) if c.source == source]
