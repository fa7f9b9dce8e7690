from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class PoolAssignment(BaseModel):
    """Applicant to pool mapping; Pool n_pools holds the highest scores"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ids: List[str]
    scores: np.ndarray
    pool_index: np.ndarray
    n_pools: int

    @model_validator(mode="after")
    def check_alignment(self):
        if not len(self.ids) == len(self.scores) == len(self.pool_index):
            raise ValueError("ids, scores and pool_index must align")
        return self

    def members(self, pool: int) -> np.ndarray:
        return np.flatnonzero(self.pool_index == pool)

    def sizes(self) -> List[int]:
        """Pool sizes ordered Pool n_pools down to Pool 1"""
        return [int((self.pool_index == k).sum()) for k in range(self.n_pools, 0, -1)]


class PoolSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    pool_index: int
    size: int
    predicted_admit_rate: Optional[float] = None
    admits: Optional[int] = None
    actual_admit_rate: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
