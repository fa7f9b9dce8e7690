import logging
from pathlib import Path
from typing import Optional

import typer

import settings
from commands.common import CONFIG_OPTION, OUT_OPTION, SEED_OPTION, VERBOSE_OPTION, cli_errors, output_dir
from models.run import PoolingConfig, RunConfig
from services.bundle_service import load_bundle
from services.evaluation_service import assign_pools
from services.ingest_service import load_dataset, outcome_labels_if_present
from services.pooling_service import summarize_pools, top_k_pool
from services.report_service import assignment_rows, pool_summary_rows, write_table
from settings import configure_logging

logger = logging.getLogger(__name__)


@cli_errors
def pool(
        config: Optional[Path] = CONFIG_OPTION,
        seed: Optional[int] = SEED_OPTION,
        out: Optional[Path] = OUT_OPTION,
        bundle: Optional[Path] = typer.Option(None, "--bundle", help="Model bundle (default: <out>/model_bundle.json)"),
        data: Optional[Path] = typer.Option(None, "--data", help="Applicants to pool (default: <out>/test_applicants.csv)"),
        pools: Optional[int] = typer.Option(None, "--pools", "-k", help="Number of quantile pools"),
        top_k: Optional[int] = typer.Option(None, "--top-k", help="Size of the Top pool"),
        verbose: bool = VERBOSE_OPTION,
):
    """Rank applicants into probability pools; scores are only written with --verbose"""
    configure_logging(verbose)
    run = RunConfig.from_yaml(config) if config is not None else None
    if seed is not None:
        logger.debug("Pooling is deterministic; --seed has no effect")
    target = output_dir(out, run)
    pooling = run.pooling if run is not None else PoolingConfig()
    updates = {k: v for k, v in {"n_pools": pools, "top_k": top_k}.items() if v is not None}
    pooling = PoolingConfig.model_validate({**pooling.model_dump(), **updates})

    model_bundle = load_bundle(bundle or target / settings.BUNDLE_FILE)
    applicants = load_dataset(data or target / settings.TEST_DATA_FILE, model_bundle.dataset_schema,
                              allow_missing_outcome=True)
    assignment = assign_pools(model_bundle, applicants, pooling.n_pools)
    labels = outcome_labels_if_present(applicants)
    summaries = summarize_pools(assignment, labels, pooling.level)

    k = pooling.top_size(len(assignment.ids))
    top = top_k_pool(assignment.scores, k)

    write_table(pool_summary_rows(summaries), target / "pool_summary.csv")
    write_table(assignment_rows(assignment, verbose), target / "pool_assignment.csv")
    write_table([{"id": assignment.ids[i]} for i in top], target / "top_pool.csv", columns=["id"])

    for summary in summaries:
        typer.echo(f"Pool {summary.pool_index}: {summary.size} applicants, "
                   f"predicted admit rate {summary.predicted_admit_rate:.3f}")
    typer.echo(f"Top pool: {k} applicants")
