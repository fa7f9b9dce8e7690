import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel

from models.ablation import AblationReport
from models.pools import PoolAssignment, PoolSummary
from models.run import EvaluationReport
from models.stats import CalibrationTable, CompositionRow, RecallCurve, ScoreHistogram
from services.ablation_service import table_rows

logger = logging.getLogger(__name__)


def write_table(rows: List[Dict[str, object]], path: Union[str, Path], columns: Optional[List[str]] = None) -> Path:
    """Comma-delimited table; None cells are written empty"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, na_rep="", lineterminator="\n", encoding="utf-8")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(model: Union[BaseModel, dict], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = model.model_dump(mode="json") if isinstance(model, BaseModel) else model
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def pool_summary_rows(summaries: List[PoolSummary]) -> List[Dict[str, object]]:
    return [
        {
            "pool_index": s.pool_index,
            "size": s.size,
            "predicted_rate": s.predicted_admit_rate,
            "admits": s.admits,
            "actual_rate": s.actual_admit_rate,
            "ci_low": s.ci_low,
            "ci_high": s.ci_high,
        }
        for s in summaries
    ]


def assignment_rows(assignment: PoolAssignment, verbose: bool = False) -> List[Dict[str, object]]:
    """Applicant to pool rows; individual scores only appear for audits (verbose)"""
    rows = []
    for i, applicant in enumerate(assignment.ids):
        row = {"id": applicant, "pool_index": int(assignment.pool_index[i])}
        if verbose:
            row["score"] = float(assignment.scores[i])
        rows.append(row)
    return rows


def recall_curve_rows(curves: Dict[str, RecallCurve]) -> List[Dict[str, object]]:
    """One row per reviewed count, one captured-share column per named curve"""
    if not curves:
        return []
    n = len(next(iter(curves.values())).k)
    return [
        {"reviewed": k + 1, **{name: curve.captured[k] for name, curve in curves.items()}}
        for k in range(n)
    ]


def composition_rows(rows: List[CompositionRow]) -> List[Dict[str, object]]:
    return [{"pool": r.pool, "size": r.size, **r.fractions} for r in rows]


def histogram_rows(histogram: ScoreHistogram) -> List[Dict[str, object]]:
    return [
        {
            "bin_low": histogram.edges[i],
            "bin_high": histogram.edges[i + 1],
            "count_denied": histogram.counts_denied[i],
            "count_admitted": histogram.counts_admitted[i],
            "density_denied": histogram.density_denied[i],
            "density_admitted": histogram.density_admitted[i],
        }
        for i in range(histogram.bins)
    ]


def calibration_rows(tables: List[CalibrationTable]) -> List[Dict[str, object]]:
    rows = []
    for table in tables:
        for row in pool_summary_rows(table.rows):
            rows.append({"group": table.group or "all", **row})
    return rows


def write_evaluation(report: EvaluationReport, out_dir: Union[str, Path]) -> List[Path]:
    out_dir = Path(out_dir)
    curves = {"model": report.recall_curve}
    if report.heuristic_recall_curve is not None:
        curves["heuristic"] = report.heuristic_recall_curve

    captures = []
    for capture in (report.top_capture, report.bottom_capture):
        row = capture.model_dump(exclude={"test"})
        row.update({
            "chi2": capture.test.chi2 if capture.test else None,
            "z": capture.test.z if capture.test else None,
            "p_one_sided": capture.test.p_one_sided if capture.test else None,
            "p_two_sided": capture.test.p_two_sided if capture.test else None,
        })
        captures.append(row)

    tables = [report.calibration] + list(report.subgroup_calibration)
    correlations = [
        {
            "group": t.group or "all",
            "r": t.correlation.r if t.correlation else None,
            "df": t.correlation.df if t.correlation else None,
            "p_value": t.correlation.p_value if t.correlation else None,
        }
        for t in tables
    ]

    paths = [
        write_table(recall_curve_rows(curves), out_dir / "recall_curve.csv"),
        write_table(captures, out_dir / "pool_capture.csv"),
        write_table(composition_rows(report.composition), out_dir / "composition.csv"),
        write_table(calibration_rows(tables), out_dir / "calibration.csv"),
        write_table(correlations, out_dir / "calibration_correlation.csv"),
        write_table(histogram_rows(report.histogram), out_dir / "score_histogram.csv"),
        write_json(report.model_dump(mode="json", exclude={"recall_curve", "heuristic_recall_curve"}),
                   out_dir / "evaluation.json"),
    ]
    logger.info(f"Wrote {len(paths)} evaluation files to {out_dir}")
    return paths


def write_ablation(report: AblationReport, out_dir: Union[str, Path]) -> List[Path]:
    out_dir = Path(out_dir)
    tests = []
    for result in report.variants:
        comparisons = []
        if result.capture_test is not None:
            comparisons.append(("admitted_capture", result.capture_test))
        comparisons += sorted(result.composition_tests.items())
        for name, test in comparisons:
            tests.append({
                "variant": result.name,
                "comparison": name,
                "chi2": test.chi2,
                "z": test.z,
                "p_one_sided": test.p_one_sided,
                "p_two_sided": test.p_two_sided,
            })

    summary = report.model_dump(mode="json", exclude={"variants": {"__all__": {"recall_curve"}}})
    paths = [
        write_table(table_rows(report), out_dir / "ablation_table.csv"),
        write_table(tests, out_dir / "ablation_tests.csv",
                    columns=["variant", "comparison", "chi2", "z", "p_one_sided", "p_two_sided"]),
        write_table(recall_curve_rows({r.name: r.recall_curve for r in report.variants}),
                    out_dir / "ablation_recall_curves.csv"),
        write_json(summary, out_dir / "ablation.json"),
    ]
    logger.info(f"Wrote {len(paths)} ablation files to {out_dir}")
    return paths
