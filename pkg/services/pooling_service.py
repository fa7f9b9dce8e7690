import logging
from typing import List, Optional, Sequence

import numpy as np

from models.pools import PoolAssignment, PoolSummary
from services.stats_service import clopper_pearson, rank_descending

logger = logging.getLogger(__name__)


def top_k_pool(scores, k: int) -> np.ndarray:
    """Row indices of the k highest scores, ties resolved in favour of earlier rows"""
    n = len(scores)
    if not 0 <= k <= n:
        raise ValueError(f"pool size {k} outside [0, {n}]")
    return np.sort(rank_descending(scores)[:k])


def bottom_k_pool(scores, k: int) -> np.ndarray:
    """Row indices of the k lowest scores: everything outside the top n - k"""
    n = len(scores)
    if not 0 <= k <= n:
        raise ValueError(f"pool size {k} outside [0, {n}]")
    keep = np.ones(n, dtype=bool)
    keep[top_k_pool(scores, n - k)] = False
    return np.flatnonzero(keep)


def pool_sizes(n: int, n_pools: int) -> List[int]:
    """Sizes for Pool n_pools down to Pool 1; remainder slots go to the highest pools"""
    base, extra = divmod(n, n_pools)
    return [base + (1 if i < extra else 0) for i in range(n_pools)]


def quantile_pools(scores, n_pools: int = 10, ids: Optional[Sequence[str]] = None) -> PoolAssignment:
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if n_pools < 1:
        raise ValueError("pool count must be at least 1")
    if n < n_pools:
        raise ValueError(f"{n} applicants cannot fill {n_pools} pools")
    ids = [str(i) for i in range(n)] if ids is None else list(ids)

    pool_index = np.empty(n, dtype=np.int64)
    order = rank_descending(scores)
    start = 0
    for offset, size in enumerate(pool_sizes(n, n_pools)):
        pool_index[order[start:start + size]] = n_pools - offset
        start += size

    logger.debug(f"Assigned {n} applicants to {n_pools} pools")
    return PoolAssignment(ids=ids, scores=scores, pool_index=pool_index, n_pools=n_pools)


def summarize_pools(
        assignment: PoolAssignment,
        labels=None,
        level: float = 0.95,
        within=None,
) -> List[PoolSummary]:
    """Per-pool predicted and actual admit rates, Pool K first.

    within restricts every pool to the applicants flagged True, for subgroup calibration.
    """
    n = len(assignment.ids)
    if labels is not None:
        labels = np.asarray(labels)
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} pooled applicants")
    keep = np.ones(n, dtype=bool)
    if within is not None:
        keep = np.asarray(within, dtype=bool)
        if len(keep) != n:
            raise ValueError(f"subgroup mask has {len(keep)} entries for {n} pooled applicants")

    summaries = []
    for pool in range(assignment.n_pools, 0, -1):
        members = np.flatnonzero((assignment.pool_index == pool) & keep)
        size = len(members)
        if size == 0:
            summaries.append(PoolSummary(pool_index=pool, size=0))
            continue

        summary = {"pool_index": pool, "size": size, "predicted_admit_rate": float(assignment.scores[members].mean())}
        if labels is not None:
            admits = int(labels[members].sum())
            interval = clopper_pearson(admits, size, level)
            summary.update(
                admits=admits,
                actual_admit_rate=admits / size,
                ci_low=interval.low,
                ci_high=interval.high,
            )
        summaries.append(PoolSummary(**summary))
    return summaries
