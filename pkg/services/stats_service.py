import math
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import special
from scipy import stats as sp_stats

from models.pools import PoolAssignment
from models.stats import (
    ChiSqResult,
    CompositionRow,
    CorrelationResult,
    ExactInterval,
    RecallCurve,
    ScoreHistogram,
)

BISECTION_TOL = 1e-13


def rank_descending(scores) -> np.ndarray:
    """Row order by score, highest first; equal scores keep input order"""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def chisq1_sf(x: float) -> float:
    """P(chi2 with 1 df > x) = erfc(sqrt(x / 2)), using scipy's double-precision erfc"""
    if x < 0:
        raise ValueError(f"chi-square statistic must be non-negative, got {x}")
    return float(special.erfc(math.sqrt(x / 2.0)))


def two_prop_chisq(x1: int, n1: int, x2: int, n2: int, alternative: Optional[str] = None) -> ChiSqResult:
    """Pearson chi-square for two proportions, no continuity correction.

    alternative: None takes the observed direction (one-sided p is half the two-sided p),
    "greater" tests p1 > p2, "less" tests p1 < p2.
    """
    for x, n in ((x1, n1), (x2, n2)):
        if n < 1:
            raise ValueError(f"trial count must be at least 1, got {n}")
        if not 0 <= x <= n:
            raise ValueError(f"successes {x} outside [0, {n}]")
    if alternative not in (None, "greater", "less"):
        raise ValueError(f"unknown alternative: {alternative}")

    pooled = (x1 + x2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        raise ValueError("test undefined: pooled proportion is 0 or 1")

    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    z = (x1 / n1 - x2 / n2) / se
    chi2 = z * z
    p_two = chisq1_sf(chi2)

    if alternative is None:
        p_one = p_two / 2
    else:
        agrees = z >= 0 if alternative == "greater" else z <= 0
        p_one = p_two / 2 if agrees else 1 - p_two / 2
    return ChiSqResult(chi2=chi2, df=1, z=z, p_two_sided=p_two, p_one_sided=p_one)


def clopper_pearson(x: int, n: int, level: float = 0.95) -> ExactInterval:
    """Exact binomial interval by bisection on the binomial tails"""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if n < 1 or not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n and n >= 1, got x={x}, n={n}")

    half_alpha = (1 - level) / 2
    x, n = int(x), int(n)
    # P(X >= x) grows with p; P(X <= x) shrinks with p
    low = 0.0 if x == 0 else _bisect(lambda p: special.bdtrc(x - 1, n, p), half_alpha, increasing=True)
    high = 1.0 if x == n else _bisect(lambda p: special.bdtr(x, n, p), half_alpha, increasing=False)
    return ExactInterval(low=low, high=high, level=level)


def _bisect(tail, target: float, increasing: bool) -> float:
    lo, hi = 0.0, 1.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        above = tail(mid) > target
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise ValueError("correlation needs at least 3 points")

    dx, dy = xs - xs.mean(), ys - ys.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined for a constant input vector")
    return float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def pearson_test(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Pearson r with its two-sided p-value from the t distribution on n - 2 df"""
    r = pearson_r(xs, ys)
    df = len(xs) - 2
    if abs(r) >= 1.0:
        p_value = 0.0
    else:
        t = r * math.sqrt(df / (1 - r * r))
        p_value = float(2 * sp_stats.t.sf(abs(t), df))
    return CorrelationResult(r=r, df=df, p_value=p_value)


def recall_at_k_curve(scores, labels) -> RecallCurve:
    labels = np.asarray(labels)
    if len(labels) != len(scores):
        raise ValueError(f"{len(scores)} scores for {len(labels)} labels")
    total = int(labels.sum())
    if total == 0:
        raise ValueError("recall curve needs at least one positive label")

    captured = np.cumsum(labels[rank_descending(scores)]) / total
    return RecallCurve(
        k=list(range(1, len(labels) + 1)),
        captured=captured.tolist(),
        total_positives=total,
    )


def group_composition(
        pools: Union[PoolAssignment, Mapping[str, Sequence[int]]],
        group_flags: Mapping[str, Sequence[bool]],
) -> List[CompositionRow]:
    """Share of each pool's members flagged for each report group"""
    flags = {name: np.asarray(values, dtype=bool) for name, values in group_flags.items()}
    lengths = {len(v) for v in flags.values()}
    if len(lengths) > 1:
        raise ValueError("group flag vectors differ in length")

    if isinstance(pools, PoolAssignment):
        if lengths and lengths != {len(pools.ids)}:
            raise ValueError("group flags do not align with the pool assignment")
        pools = {f"Pool {k}": pools.members(k) for k in range(pools.n_pools, 0, -1)}

    n = lengths.pop() if lengths else None
    rows = []
    for label, members in pools.items():
        members = np.asarray(members, dtype=np.int64)
        if n is not None and members.size and (members.min() < 0 or members.max() >= n):
            raise ValueError(f"pool {label} references applicants outside the group flags")
        fractions: Dict[str, float] = {}
        for name, values in flags.items():
            fractions[name] = float(values[members].mean()) if members.size else 0.0
        rows.append(CompositionRow(pool=label, size=int(members.size), fractions=fractions))
    return rows


def score_histogram(scores, labels, bins: int = 50) -> ScoreHistogram:
    """Equal-width bins on [0, 1] per class, counts plus densities integrating to one"""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores for {len(labels)} labels")
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise ValueError("scores must lie in [0, 1]")

    edges = np.linspace(0.0, 1.0, bins + 1)
    width = 1.0 / bins
    counts, densities = {}, {}
    for cls in (0, 1):
        c, _ = np.histogram(scores[labels == cls], bins=edges)
        total = c.sum()
        counts[cls] = c
        densities[cls] = c / (total * width) if total else np.zeros(bins)

    return ScoreHistogram(
        edges=edges.tolist(),
        counts_denied=counts[0].astype(int).tolist(),
        counts_admitted=counts[1].astype(int).tolist(),
        density_denied=densities[0].tolist(),
        density_admitted=densities[1].tolist(),
    )
