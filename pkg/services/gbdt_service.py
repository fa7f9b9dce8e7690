import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from models.features import FeatureMask, FeatureMatrix
from models.gbdt import GbdtModel, TrainConfig, TreeNode

logger = logging.getLogger(__name__)

PROBA_CLIP = 1e-12
HESSIAN_FLOOR = 1e-12
_P_LOW = np.finfo(np.float64).tiny
_P_HIGH = np.nextafter(1.0, 0.0)


def fit_gbdt(
        X: FeatureMatrix,
        y,
        config: Optional[TrainConfig] = None,
        mask: Optional[FeatureMask] = None,
) -> GbdtModel:
    """Gradient boosting for binary log-loss with variance-reduction trees and Newton leaf values"""
    config = config or TrainConfig()
    values = _as_values(X)
    y = np.asarray(y, dtype=np.float64)
    n, n_features = values.shape

    if len(y) != n:
        raise ValueError(f"{len(y)} labels for {n} rows")
    if n < 2:
        raise ValueError("at least two rows are required to fit")
    mask = np.ones(n_features, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (n_features,):
        raise ValueError(f"feature mask has {mask.shape[0]} entries for {n_features} features")
    if not mask.any():
        raise ValueError("every feature is masked; nothing to fit on")

    base_rate = float(np.clip(y.mean(), PROBA_CLIP, 1 - PROBA_CLIP))
    init_score = float(np.log(base_rate / (1 - base_rate)))

    trees, deviance = [], []
    if n < config.min_samples_split:
        logger.warning(f"Only {n} rows (< min_samples_split={config.min_samples_split}); model is the base rate")
    else:
        builder = _TreeBuilder(values, mask, config)
        rng = np.random.default_rng(config.seed)
        n_sample = max(1, int(round(config.subsample * n)))
        margin = np.full(n, init_score)

        for stage in range(config.n_stages):
            p = expit(margin)
            residuals = y - p
            hessians = p * (1 - p)

            rows = np.ones(n, dtype=bool)
            if n_sample < n:
                rows = np.zeros(n, dtype=bool)
                rows[rng.choice(n, size=n_sample, replace=False)] = True

            tree = builder.build(rows, residuals, hessians)
            trees.append(tree)
            margin = margin + config.learning_rate * tree_output(tree, values)
            deviance.append(binomial_deviance(y, margin))
            logger.debug(f"Stage {stage + 1}: {tree.n_leaves} leaves, deviance {deviance[-1]:.6f}")

    model = GbdtModel(
        init_score=init_score,
        trees=trees,
        learning_rate=config.learning_rate,
        n_features=n_features,
        feature_mask=mask.tolist(),
        train_deviance=deviance,
        config=config,
    )
    logger.info(
        f"Fitted {len(trees)} stages on {n} rows x {int(mask.sum())} active features"
        + (f", final deviance {deviance[-1]:.6f}" if deviance else "")
    )
    return model


def best_split(residuals, values, min_samples_leaf: int = 1) -> Optional[Tuple[float, float]]:
    """Best (threshold, gain) over midpoints of one column, or None when no split reduces the residual SSE"""
    residuals = np.asarray(residuals, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return None
    order = np.argsort(values, kind="stable")
    found = _best_sorted_split(values[order][None, :], residuals[order][None, :], min_samples_leaf)
    if found is None:
        return None
    _, threshold, gain = found
    return threshold, gain


def predict_margin(model: GbdtModel, X: FeatureMatrix) -> np.ndarray:
    values = _as_values(X)
    if values.shape[1] != model.n_features:
        raise ValueError(f"column-count mismatch: model expects {model.n_features}, got {values.shape[1]}")

    margin = np.full(values.shape[0], model.init_score)
    for tree in model.trees:
        margin += model.learning_rate * tree_output(tree, values)
    return margin


def predict_proba(model: GbdtModel, X: FeatureMatrix) -> np.ndarray:
    """Admit probability, kept strictly inside (0, 1)"""
    return np.clip(expit(predict_margin(model, X)), _P_LOW, _P_HIGH)


def tree_output(tree: TreeNode, values: np.ndarray) -> np.ndarray:
    out = np.zeros(values.shape[0])
    stack = [(tree, np.arange(values.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if node.is_leaf:
            out[rows] = node.value
            continue
        go_left = values[rows, node.feature_index] <= node.threshold
        stack.append((node.left, rows[go_left]))
        stack.append((node.right, rows[~go_left]))
    return out


def binomial_deviance(y: np.ndarray, margin: np.ndarray) -> float:
    """Mean of twice the negative log-likelihood"""
    return float(2 * np.mean(y * np.logaddexp(0, -margin) + (1 - y) * np.logaddexp(0, margin)))


def _as_values(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.asarray(X, dtype=np.float64)


def _best_sorted_split(sorted_values: np.ndarray, sorted_residuals: np.ndarray, min_samples_leaf: int):
    """Scan features (rows) whose entries are already sorted by value.

    Returns (feature_row, threshold, gain) maximizing the SSE reduction; ties resolve to the
    lowest feature row, then the lowest threshold.
    """
    m = sorted_values.shape[1]
    if m < 2:
        return None

    csum = np.cumsum(sorted_residuals, axis=1)
    total = csum[:, -1:]
    left_sum = csum[:, :-1]
    right_sum = total - left_sum
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left

    gain = left_sum ** 2 / n_left + right_sum ** 2 / n_right - total ** 2 / m
    valid = sorted_values[:, :-1] != sorted_values[:, 1:]
    valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    gain = np.where(valid, gain, -np.inf)

    top = float(np.max(gain))
    # every row holds the same node residuals, only reordered
    sumsq = float(np.sum(sorted_residuals[0] ** 2))
    if not np.isfinite(top) or top <= 1e-12 * max(sumsq, 1e-300):
        return None

    # cumsum order differs per feature, so equal partitions can differ in the last ulp
    near = gain >= top - 1e-12 * max(abs(top), sumsq)
    feature = int(np.argmax(near.any(axis=1)))
    pos = int(np.argmax(near[feature]))
    top = float(gain[feature, pos])

    lo, hi = sorted_values[feature, pos], sorted_values[feature, pos + 1]
    threshold = 0.5 * (lo + hi)
    if threshold >= hi:
        threshold = lo
    return feature, float(threshold), top


class _TreeBuilder:
    """Exact greedy builder; each active column is presorted once and filtered per node"""

    def __init__(self, values: np.ndarray, mask: np.ndarray, config: TrainConfig):
        self.values = values
        self.config = config
        varying = np.ptp(values, axis=0) > 0
        self.active = np.flatnonzero(mask & varying)
        self.active_t = np.ascontiguousarray(values[:, self.active].T)
        self.order_t = np.ascontiguousarray(np.argsort(values[:, self.active], axis=0, kind="stable").T)

    def build(self, rows: np.ndarray, residuals: np.ndarray, hessians: np.ndarray) -> TreeNode:
        return self._grow(rows, residuals, hessians, depth=0)

    def _grow(self, members: np.ndarray, residuals, hessians, depth: int) -> TreeNode:
        count = int(members.sum())
        if depth >= self.config.max_depth or count < self.config.min_samples_split or len(self.active) == 0:
            return self._leaf(members, residuals, hessians)

        node_order = self.order_t[members[self.order_t]].reshape(len(self.active), count)
        sorted_values = np.take_along_axis(self.active_t, node_order, axis=1)
        found = _best_sorted_split(sorted_values, residuals[node_order], self.config.min_samples_leaf)
        if found is None:
            return self._leaf(members, residuals, hessians)

        local, threshold, _ = found
        feature = int(self.active[local])
        goes_left = self.values[:, feature] <= threshold
        return TreeNode(
            feature_index=feature,
            threshold=threshold,
            left=self._grow(members & goes_left, residuals, hessians, depth + 1),
            right=self._grow(members & ~goes_left, residuals, hessians, depth + 1),
        )

    @staticmethod
    def _leaf(members, residuals, hessians) -> TreeNode:
        value = residuals[members].sum() / max(hessians[members].sum(), HESSIAN_FLOOR)
        return TreeNode(value=float(value))
