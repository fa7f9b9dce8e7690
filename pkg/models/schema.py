from enum import Enum
from typing import List, Optional, Set

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ColumnRole(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TEXT = "text"
    IDENTIFIER = "identifier"
    OUTCOME = "outcome"


FEATURE_ROLES = (ColumnRole.NUMERIC, ColumnRole.CATEGORICAL, ColumnRole.TEXT)


class ColumnSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    role: ColumnRole
    groups: List[str] = Field(default_factory=list)

    @field_validator("groups")
    def normalize_groups(cls, v):
        return sorted(set(v))


class OutcomeVocabulary(BaseModel):
    model_config = ConfigDict(frozen=True)

    positive: List[str] = Field(default_factory=lambda: ["admitted", "conditionally admitted"])
    negative: List[str] = Field(default_factory=lambda: ["denied", "wait-listed", "withdrawn"])

    @model_validator(mode="after")
    def check_disjoint(self):
        overlap = {v.strip().lower() for v in self.positive} & {v.strip().lower() for v in self.negative}
        if overlap:
            raise ValueError(f"outcome vocabularies overlap: {sorted(overlap)}")
        return self


class DatasetSchema(BaseModel):
    """Ordered column declarations driving ingestion, featurization and ablation masks"""
    model_config = ConfigDict(frozen=True)

    columns: List[ColumnSpec]
    outcome_vocabulary: OutcomeVocabulary = Field(default_factory=OutcomeVocabulary)

    @model_validator(mode="after")
    def check_columns(self):
        names = [c.name for c in self.columns]
        seen = set()
        for name in names:
            if name in seen:
                raise ValueError(f"duplicate column name: {name}")
            seen.add(name)

        outcomes = [c for c in self.columns if c.role == ColumnRole.OUTCOME]
        if len(outcomes) == 0:
            raise ValueError("no outcome column")
        if len(outcomes) > 1:
            raise ValueError("multiple outcome columns")
        if len([c for c in self.columns if c.role == ColumnRole.IDENTIFIER]) > 1:
            raise ValueError("multiple identifier columns")

        for c in self.columns:
            if c.groups and c.role not in FEATURE_ROLES:
                raise ValueError(f"group tags are not allowed on {c.role.value} column {c.name}")
        return self

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    @property
    def outcome_column(self) -> str:
        return next(c.name for c in self.columns if c.role == ColumnRole.OUTCOME)

    @property
    def identifier_column(self) -> Optional[str]:
        return next((c.name for c in self.columns if c.role == ColumnRole.IDENTIFIER), None)

    @property
    def feature_columns(self) -> List[ColumnSpec]:
        return [c for c in self.columns if c.role in FEATURE_ROLES]

    @property
    def all_groups(self) -> Set[str]:
        return {g for c in self.columns for g in c.groups}

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise ValueError(f"unknown column: {name}")

    def columns_with_group(self, tag: str) -> List[str]:
        return [c.name for c in self.columns if tag in c.groups]


class RawDataset(BaseModel):
    """String cells per schema column; None marks an explicitly missing cell"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dataset_schema: DatasetSchema
    frame: pd.DataFrame

    @model_validator(mode="after")
    def check_arity(self):
        names = self.dataset_schema.names
        feature_view = [n for n in names if n != self.dataset_schema.outcome_column]
        if list(self.frame.columns) not in (names, feature_view):
            raise ValueError(
                f"frame columns {list(self.frame.columns)} do not match schema {self.dataset_schema.names}"
            )
        return self

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def has_outcome(self) -> bool:
        return self.dataset_schema.outcome_column in self.frame.columns

    def column_values(self, name: str) -> List[Optional[str]]:
        return self.frame[name].tolist()

    def take(self, indices) -> "RawDataset":
        frame = self.frame.iloc[np.asarray(indices, dtype=np.int64)].reset_index(drop=True)
        return RawDataset(dataset_schema=self.dataset_schema, frame=frame)


class LabeledDataset(BaseModel):
    """Features (outcome column dropped from the frame), binary labels and row ids"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    features: RawDataset
    labels: np.ndarray
    ids: List[str]

    @model_validator(mode="after")
    def check_alignment(self):
        n = self.features.n_rows
        if len(self.labels) != n or len(self.ids) != n:
            raise ValueError(f"labels ({len(self.labels)}) and ids ({len(self.ids)}) must match {n} rows")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be binary")
        return self

    @property
    def n_rows(self) -> int:
        return self.features.n_rows

    @property
    def prevalence(self) -> float:
        return float(np.mean(self.labels)) if self.n_rows else 0.0

    def take(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            features=self.features.take(idx),
            labels=self.labels[idx],
            ids=[self.ids[i] for i in idx],
        )
