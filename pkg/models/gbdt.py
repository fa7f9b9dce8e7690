from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_stages: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    subsample: float = 1.0
    seed: int = 0

    @field_validator("n_stages", "max_depth", "min_samples_leaf")
    def check_positive(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1")
        return v

    @field_validator("min_samples_split")
    def check_min_split(cls, v):
        if v < 2:
            raise ValueError("min_samples_split must be at least 2")
        return v

    @field_validator("learning_rate")
    def check_learning_rate(cls, v):
        if not 0 < v <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        return v

    @field_validator("subsample")
    def check_subsample(cls, v):
        if not 0 < v <= 1:
            raise ValueError("subsample must lie in (0, 1]")
        return v


class TreeNode(BaseModel):
    """Internal node routes x[feature_index] <= threshold left; a leaf carries a log-odds increment"""
    model_config = ConfigDict(frozen=True)

    feature_index: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: Optional[float] = None

    @model_validator(mode="after")
    def check_shape(self):
        internal = (self.feature_index, self.threshold, self.left, self.right)
        if self.value is not None:
            if any(part is not None for part in internal):
                raise ValueError("a leaf cannot carry split fields")
        elif any(part is None for part in internal):
            raise ValueError("an internal node needs feature_index, threshold, left and right")
        return self

    @property
    def is_leaf(self) -> bool:
        return self.value is not None

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth, self.right.depth)

    @property
    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves + self.right.n_leaves

    def split_features(self) -> List[int]:
        if self.is_leaf:
            return []
        return [self.feature_index] + self.left.split_features() + self.right.split_features()


class GbdtModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    init_score: float
    trees: List[TreeNode] = Field(default_factory=list)
    learning_rate: float
    n_features: int
    feature_mask: List[bool]
    train_deviance: List[float] = Field(default_factory=list)
    config: TrainConfig

    @model_validator(mode="after")
    def check_mask(self):
        if len(self.feature_mask) != self.n_features:
            raise ValueError(f"feature mask has {len(self.feature_mask)} entries for {self.n_features} features")
        return self
