import logging
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

import settings
from models.ablation import AblationReport, AblationVariant, ReferenceRow, VariantResult
from models.features import FeatureMatrix, PipelineConfig
from models.gbdt import TrainConfig
from models.schema import LabeledDataset
from models.stats import ChiSqResult
from services.featurize_service import fit_pipeline, mask_for_groups, transform
from services.gbdt_service import fit_gbdt, predict_proba
from services.ingest_service import report_flags
from services.pooling_service import top_k_pool
from services.stats_service import recall_at_k_curve, two_prop_chisq

logger = logging.getLogger(__name__)

APPLICANT_POOL = "Applicant pool"
HEURISTIC_POOL = "Score heuristic"


class AblationService:
    """Refits the model once per feature-group variant on one shared split"""

    def __init__(
            self,
            pipeline_config: Optional[PipelineConfig] = None,
            train_config: Optional[TrainConfig] = None,
            n_jobs: Optional[int] = None,
    ):
        self.pipeline_config = pipeline_config
        self.train_config = train_config or TrainConfig()
        self.n_jobs = n_jobs or settings.N_JOBS

    def run_variants(
            self,
            train: LabeledDataset,
            test: LabeledDataset,
            variants: Sequence[AblationVariant],
            k: int,
            report_groups: Iterable[str] = (),
            baseline_exclude_groups: Iterable[str] = (),
            heuristic_scores=None,
    ) -> AblationReport:
        """Fit every variant and compare Top-pool captures.

        The first variant is the reference every other variant is tested against. Every variant
        starts from baseline_exclude_groups; its include_groups can bring those back.
        """
        if not variants:
            raise ValueError("at least one variant is required")
        names = [v.name for v in variants]
        if len(set(names)) != len(names):
            raise ValueError("variant names must be unique")
        if not 0 <= k <= test.n_rows:
            raise ValueError(f"Top-pool size {k} outside [0, {test.n_rows}]")
        total_admits = int(test.labels.sum())
        if total_admits == 0:
            raise ValueError("test set has no admitted applicants")

        pipeline = fit_pipeline(train.features, self.pipeline_config)
        masks = [
            mask_for_groups(pipeline, set(baseline_exclude_groups) | set(v.exclude_groups), v.include_groups)
            for v in variants
        ]
        X_train = transform(pipeline, train.features)
        X_test = transform(pipeline, test.features)

        logger.info(f"Running {len(variants)} variants (n_jobs={self.n_jobs}, k={k})")
        scores = Parallel(n_jobs=self.n_jobs)(
            delayed(_fit_and_score)(X_train, train.labels, X_test, self.train_config, mask) for mask in masks
        )

        groups = list(report_groups)
        flags = report_flags(test.features, groups)
        pools = [top_k_pool(s, k) for s in scores]
        counts = [_group_counts(pool, flags) for pool in pools]
        captured = [int(test.labels[pool].sum()) for pool in pools]

        results = []
        for i, variant in enumerate(variants):
            capture_test, composition_tests = None, {}
            if i > 0:
                capture_test = _compare(captured[i], total_admits, captured[0], total_admits)
                for group in groups:
                    result = _compare(counts[i][group], k, counts[0][group], k)
                    if result is not None:
                        composition_tests[group] = result

            results.append(VariantResult(
                name=variant.name,
                exclude_groups=variant.exclude_groups,
                include_groups=variant.include_groups,
                n_features_used=int(masks[i].sum()),
                admits_captured=captured[i],
                capture_rate=captured[i] / total_admits,
                composition={g: (counts[i][g] / k if k else 0.0) for g in groups},
                capture_test=capture_test,
                composition_tests=composition_tests,
                recall_curve=recall_at_k_curve(scores[i], test.labels),
            ))
            logger.info(f"{variant.name}: captured {captured[i]}/{total_admits} admits in the top {k}")

        reference_rows = [ReferenceRow(
            label=APPLICANT_POOL,
            size=test.n_rows,
            composition={g: float(flags[g].mean()) for g in groups},
        )]
        if heuristic_scores is not None:
            pool = top_k_pool(heuristic_scores, k)
            admits = int(test.labels[pool].sum())
            reference_rows.append(ReferenceRow(
                label=HEURISTIC_POOL,
                size=k,
                admits_captured=admits,
                capture_rate=admits / total_admits,
                composition={g: (c / k if k else 0.0) for g, c in _group_counts(pool, flags).items()},
            ))

        return AblationReport(
            k=k,
            n_test=test.n_rows,
            total_admits=total_admits,
            report_groups=groups,
            variants=results,
            reference_rows=reference_rows,
        )


def _fit_and_score(X_train: FeatureMatrix, y_train, X_test: FeatureMatrix, config: TrainConfig, mask) -> np.ndarray:
    model = fit_gbdt(X_train, y_train, config, mask)
    return predict_proba(model, X_test)


def _group_counts(pool: np.ndarray, flags: Dict[str, np.ndarray]) -> Dict[str, int]:
    return {group: int(values[pool].sum()) for group, values in flags.items()}


def _compare(x1: int, n1: int, x2: int, n2: int) -> Optional[ChiSqResult]:
    try:
        return two_prop_chisq(x1, n1, x2, n2)
    except ValueError as e:
        logger.warning(f"Skipping comparison {x1}/{n1} vs {x2}/{n2}: {e}")
        return None


def table_rows(report: AblationReport) -> List[Dict[str, object]]:
    """Comparison table: one row per reference pool and variant, percentages of captured admits and group shares"""
    rows = []
    for ref in report.reference_rows:
        row = {"variant": ref.label, "pool_size": ref.size, "admitted_capture_pct": _pct(ref.capture_rate)}
        row.update({f"{g}_pct": _pct(ref.composition.get(g)) for g in report.report_groups})
        rows.append(row)

    for result in report.variants:
        row = {
            "variant": result.name,
            "pool_size": report.k,
            "admitted_capture_pct": _pct(result.capture_rate),
        }
        row.update({f"{g}_pct": _pct(result.composition.get(g)) for g in report.report_groups})
        test = result.capture_test
        row.update({
            "chi2_vs_baseline": None if test is None else test.chi2,
            "p_one_sided": None if test is None else test.p_one_sided,
            "p_two_sided": None if test is None else test.p_two_sided,
        })
        rows.append(row)
    return rows


def _pct(value: Optional[float]) -> Optional[float]:
    return None if value is None else 100.0 * value
