import logging
from typing import Dict, Iterable, Optional

import numpy as np

from models.pools import PoolAssignment
from models.run import CaptureComparison, EvaluationReport, ModelBundle, PoolingConfig
from models.schema import ColumnRole, RawDataset
from models.stats import CalibrationTable
from services.featurize_service import parse_numeric, transform
from services.gbdt_service import predict_proba
from services.ingest_service import report_flags, row_ids, to_labeled
from services.pooling_service import bottom_k_pool, quantile_pools, summarize_pools, top_k_pool
from services.stats_service import (
    group_composition,
    pearson_test,
    recall_at_k_curve,
    score_histogram,
    two_prop_chisq,
)

logger = logging.getLogger(__name__)


def score_dataset(bundle: ModelBundle, data: RawDataset) -> np.ndarray:
    """Admit probabilities for every row of data under the bundled pipeline and model"""
    return predict_proba(bundle.model, transform(bundle.pipeline, data))


def heuristic_scores(data: RawDataset, column: str) -> np.ndarray:
    """A single numeric column used as a ranking; missing cells rank last"""
    schema = data.dataset_schema
    if column not in schema.names or column not in data.frame.columns:
        raise ValueError(f"unknown baseline column: {column}")
    if schema.column(column).role != ColumnRole.NUMERIC:
        raise ValueError(f"baseline column {column} must be numeric")
    values = parse_numeric(column, data.column_values(column))
    return np.where(np.isnan(values), -np.inf, values)


def assign_pools(bundle: ModelBundle, data: RawDataset, n_pools: int = 10) -> PoolAssignment:
    return quantile_pools(score_dataset(bundle, data), n_pools, ids=row_ids(data))


def calibration_table(
        assignment: PoolAssignment,
        labels,
        level: float = 0.95,
        group: Optional[str] = None,
        within=None,
) -> CalibrationTable:
    """Pool summaries with the predicted-vs-actual correlation across non-empty pools"""
    rows = summarize_pools(assignment, labels, level, within)
    filled = [r for r in rows if r.size > 0]
    correlation = None
    try:
        correlation = pearson_test(
            [r.predicted_admit_rate for r in filled],
            [r.actual_admit_rate for r in filled],
        )
    except ValueError as e:
        logger.warning(f"No calibration correlation{f' for {group}' if group else ''}: {e}")
    return CalibrationTable(group=group, rows=rows, correlation=correlation)


def evaluate(
        bundle: ModelBundle,
        data: RawDataset,
        pooling: Optional[PoolingConfig] = None,
        report_groups: Iterable[str] = (),
        baseline_score_column: Optional[str] = None,
        heuristic=None,
) -> EvaluationReport:
    """Score labeled applicants and assemble recall, capture, composition, calibration and histogram results.

    The heuristic ranking comes from baseline_score_column, or from precomputed per-row heuristic scores.
    """
    pooling = pooling or PoolingConfig()
    if not data.has_outcome or all(v is None for v in data.column_values(data.dataset_schema.outcome_column)):
        raise ValueError("evaluation needs outcome labels in the data")

    labeled = to_labeled(data)
    labels = labeled.labels
    n = labeled.n_rows
    total_admits = int(labels.sum())
    scores = score_dataset(bundle, labeled.features)
    if baseline_score_column:
        heuristic = heuristic_scores(data, baseline_score_column)
    elif heuristic is not None:
        heuristic = np.asarray(heuristic, dtype=np.float64)
        if len(heuristic) != n:
            raise ValueError(f"{len(heuristic)} heuristic scores for {n} applicants")

    k_top, k_bottom = pooling.top_size(n), pooling.bottom_size(n)
    top = top_k_pool(scores, k_top)
    bottom = bottom_k_pool(scores, k_bottom)
    heuristic_top = top_k_pool(heuristic, k_top) if heuristic is not None else None
    heuristic_bottom = bottom_k_pool(heuristic, k_bottom) if heuristic is not None else None

    groups = list(report_groups)
    flags = report_flags(labeled.features, groups)
    assignment = quantile_pools(scores, pooling.n_pools, ids=labeled.ids)

    named_pools: Dict[str, np.ndarray] = {
        "Applicant pool": np.arange(n),
        "Admitted class": np.flatnonzero(labels == 1),
        "Model top pool": top,
    }
    if heuristic_top is not None:
        named_pools["Heuristic top pool"] = heuristic_top
    composition = group_composition(named_pools, flags) + group_composition(assignment, flags)

    report = EvaluationReport(
        n_test=n,
        total_admits=total_admits,
        recall_curve=recall_at_k_curve(scores, labels),
        heuristic_recall_curve=recall_at_k_curve(heuristic, labels) if heuristic is not None else None,
        top_capture=_capture("top", top, heuristic_top, labels),
        bottom_capture=_capture("bottom", bottom, heuristic_bottom, labels),
        composition=composition,
        calibration=calibration_table(assignment, labels, pooling.level),
        subgroup_calibration=[
            calibration_table(assignment, labels, pooling.level, group=g, within=flags[g]) for g in groups
        ],
        histogram=score_histogram(scores, labels, pooling.histogram_bins),
    )
    logger.info(
        f"Evaluated {n} applicants: top {k_top} pool captures {report.top_capture.model_admits}/{total_admits} admits"
    )
    return report


def _capture(name: str, pool: np.ndarray, heuristic_pool: Optional[np.ndarray], labels: np.ndarray) -> CaptureComparison:
    total = int(labels.sum())
    admits = int(labels[pool].sum())
    fields = {
        "pool": name,
        "size": len(pool),
        "total_admits": total,
        "model_admits": admits,
        "model_rate": admits / total if total else 0.0,
    }
    if heuristic_pool is not None:
        heuristic_admits = int(labels[heuristic_pool].sum())
        fields.update(heuristic_admits=heuristic_admits, heuristic_rate=heuristic_admits / total if total else 0.0)
        try:
            fields["test"] = two_prop_chisq(admits, total, heuristic_admits, total)
        except ValueError as e:
            logger.warning(f"No {name}-pool comparison: {e}")
    return CaptureComparison(**fields)
