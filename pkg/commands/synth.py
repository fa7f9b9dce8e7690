import logging
from pathlib import Path
from typing import Optional

import typer
import yaml

from commands.common import CONFIG_OPTION, OUT_OPTION, SEED_OPTION, VERBOSE_OPTION, cli_errors, output_dir
from models.synth import GeneratorConfig
from services.synth_service import generate_dataset, write_synthetic
from settings import configure_logging

logger = logging.getLogger(__name__)


@cli_errors
def synth(
        config: Optional[Path] = CONFIG_OPTION,
        seed: Optional[int] = SEED_OPTION,
        out: Optional[Path] = OUT_OPTION,
        rows: Optional[int] = typer.Option(None, "--rows", "-n", help="Number of applicants to generate"),
        verbose: bool = VERBOSE_OPTION,
):
    """Generate a synthetic applicant file and its schema"""
    configure_logging(verbose)
    document = {}
    if config is not None:
        try:
            document = yaml.safe_load(config.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"{config}: invalid generator config: {e}") from e
        # A run config may nest the generator settings under "synth"
        document = document.get("synth", document) if isinstance(document, dict) else document
        if not isinstance(document, dict):
            raise ValueError(f"{config}: generator config must be a mapping")
    if seed is not None:
        document["seed"] = seed
    if rows is not None:
        document["n_rows"] = rows

    generator = GeneratorConfig.model_validate(document)
    dataset = generate_dataset(generator)
    schema_path, data_path = write_synthetic(dataset, output_dir(out))
    typer.echo(f"schema: {schema_path}")
    typer.echo(f"data: {data_path} ({generator.n_rows} rows, prevalence {dataset.labels.mean():.4f})")
