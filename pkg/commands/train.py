import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import typer

import settings
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
from models.features import FittedPipeline
from models.run import BundleMetadata, ModelBundle
from services.bundle_service import save_bundle
from services.featurize_service import fit_pipeline, mask_for_groups, transform
from services.gbdt_service import fit_gbdt
from services.ingest_service import write_dataset
from services.report_service import write_table
from settings import configure_logging

logger = logging.getLogger(__name__)


@cli_errors
def train(
        config: Optional[Path] = CONFIG_OPTION,
        seed: Optional[int] = SEED_OPTION,
        out: Optional[Path] = OUT_OPTION,
        verbose: bool = VERBOSE_OPTION,
):
    """Split, featurize and fit; write the model bundle, split manifest and held-out rows"""
    configure_logging(verbose)
    run = load_run_config(config, seed)
    target = output_dir(out, run)
    data = prepare_data(run)

    pipeline = fit_pipeline(data.train.features, run.pipeline)
    mask = mask_for_groups(pipeline, run.baseline_exclude_groups)
    model = fit_gbdt(transform(pipeline, data.train.features), data.train.labels, run.train, mask)

    bundle = ModelBundle(
        dataset_schema=data.raw.dataset_schema,
        pipeline=pipeline,
        model=model,
        metadata=BundleMetadata(
            seed=run.seed,
            test_fraction=run.test_fraction,
            n_train=data.train.n_rows,
            n_test=data.test.n_rows,
            train_prevalence=data.train.prevalence,
            test_prevalence=data.test.prevalence,
            created_at=settings.bundle_timestamp(),
            excluded_groups=run.baseline_exclude_groups,
            feature_groups=feature_groups(pipeline),
        ),
    )
    save_bundle(bundle, target / settings.BUNDLE_FILE)

    manifest = [{"id": i, "split": "train"} for i in data.train.ids]
    manifest += [{"id": i, "split": "test"} for i in data.test.ids]
    write_table(manifest, target / settings.MANIFEST_FILE, columns=["id", "split"])

    position = {applicant: row for row, applicant in enumerate(data.labeled.ids)}
    test_rows = np.array([position[i] for i in data.test.ids], dtype=np.int64)
    write_dataset(data.raw.take(test_rows), target / settings.TEST_DATA_FILE)

    typer.echo(f"train: n={data.train.n_rows} prevalence={data.train.prevalence:.4f}")
    typer.echo(f"test: n={data.test.n_rows} prevalence={data.test.prevalence:.4f}")
    typer.echo(f"bundle: {target / settings.BUNDLE_FILE}")


def feature_groups(pipeline: FittedPipeline) -> Dict[str, List[str]]:
    """Output column names carrying each group tag"""
    groups: Dict[str, List[str]] = {}
    for column in pipeline.columns:
        for tag in column.groups:
            groups.setdefault(tag, []).append(column.name)
    return dict(sorted(groups.items()))
