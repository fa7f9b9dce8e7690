import logging
from pathlib import Path
from typing import Optional

import typer

import settings
from commands.common import CONFIG_OPTION, OUT_OPTION, SEED_OPTION, VERBOSE_OPTION, cli_errors, output_dir
from models.run import PoolingConfig, RunConfig
from services.bundle_service import load_bundle
from services.evaluation_service import evaluate as evaluate_applicants
from services.ingest_service import load_dataset
from services.report_service import write_evaluation
from settings import configure_logging

logger = logging.getLogger(__name__)


@cli_errors
def evaluate(
        config: Optional[Path] = CONFIG_OPTION,
        seed: Optional[int] = SEED_OPTION,
        out: Optional[Path] = OUT_OPTION,
        bundle: Optional[Path] = typer.Option(None, "--bundle", help="Model bundle (default: <out>/model_bundle.json)"),
        data: Optional[Path] = typer.Option(None, "--data", help="Labeled test applicants (default: <out>/test_applicants.csv)"),
        top_k: Optional[int] = typer.Option(None, "--top-k", help="Size of the Top pool"),
        baseline_column: Optional[str] = typer.Option(None, "--baseline-column", help="Numeric column ranked as the score heuristic"),
        verbose: bool = VERBOSE_OPTION,
):
    """Write recall, capture, composition, calibration and histogram reports for held-out applicants"""
    configure_logging(verbose)
    run = RunConfig.from_yaml(config) if config is not None else None
    if seed is not None:
        logger.debug("Evaluation is deterministic; --seed has no effect")
    target = output_dir(out, run)
    pooling = run.pooling if run is not None else PoolingConfig()
    if top_k is not None:
        pooling = pooling.model_copy(update={"top_k": top_k})
    report_groups = run.report_groups if run is not None else []
    baseline_column = baseline_column or (run.baseline_score_column if run is not None else None)

    model_bundle = load_bundle(bundle or target / settings.BUNDLE_FILE)
    applicants = load_dataset(data or target / settings.TEST_DATA_FILE, model_bundle.dataset_schema)
    report = evaluate_applicants(model_bundle, applicants, pooling, report_groups, baseline_column)
    write_evaluation(report, target)

    top = report.top_capture
    typer.echo(f"Top pool ({top.size}): {top.model_admits}/{top.total_admits} admits ({100 * top.model_rate:.1f}%)")
    if top.heuristic_admits is not None:
        typer.echo(f"Heuristic top pool: {top.heuristic_admits}/{top.total_admits} admits ({100 * top.heuristic_rate:.1f}%)")
    if top.test is not None:
        typer.echo(f"chi2(1) = {top.test.chi2:.4f}, one-sided p = {top.test.p_one_sided:.4g}")
    if report.calibration.correlation is not None:
        typer.echo(f"Pool calibration r = {report.calibration.correlation.r:.4f}")
