import logging
from pathlib import Path
from typing import Optional

import typer

from commands.common import (
    CONFIG_OPTION,
    OUT_OPTION,
    SEED_OPTION,
    VERBOSE_OPTION,
    cli_errors,
    load_run_config,
    output_dir,
    prepare_data,
)
from services.ablation_service import AblationService
from services.evaluation_service import heuristic_scores
from services.report_service import write_ablation
from settings import configure_logging

logger = logging.getLogger(__name__)


@cli_errors
def ablate(
        config: Optional[Path] = CONFIG_OPTION,
        seed: Optional[int] = SEED_OPTION,
        out: Optional[Path] = OUT_OPTION,
        n_jobs: Optional[int] = typer.Option(None, "--jobs", "-j", help="Variants trained in parallel"),
        verbose: bool = VERBOSE_OPTION,
):
    """Refit the model per feature-group variant and write the comparison tables"""
    configure_logging(verbose)
    run = load_run_config(config, seed)
    target = output_dir(out, run)
    data = prepare_data(run)

    heuristic = None
    if run.baseline_score_column:
        heuristic = heuristic_scores(data.test.features, run.baseline_score_column)

    ablation_service = AblationService(run.pipeline, run.train, n_jobs)
    report = ablation_service.run_variants(
        data.train,
        data.test,
        run.variants,
        k=run.pooling.top_size(data.test.n_rows),
        report_groups=run.report_groups,
        baseline_exclude_groups=run.baseline_exclude_groups,
        heuristic_scores=heuristic,
    )
    write_ablation(report, target)

    for result in report.variants:
        line = f"{result.name}: {100 * result.capture_rate:.1f}% of admits in the top {report.k}"
        if result.capture_test is not None:
            line += f" (chi2 {result.capture_test.chi2:.3f} vs {report.baseline.name})"
        typer.echo(line)
