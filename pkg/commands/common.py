import logging
from functools import wraps
from pathlib import Path
from typing import NamedTuple, Optional

import typer

import settings
from models.run import RunConfig
from models.schema import LabeledDataset, RawDataset
from services.ingest_service import drop_duplicates, filter_rows, load_dataset, load_schema, split_train_test, to_labeled

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_IO = 2

# Options shared by every command
CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Run configuration (YAML)")
SEED_OPTION = typer.Option(None, "--seed", help="Override the configured seed")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory")
VERBOSE_OPTION = typer.Option(False, "--verbose", "-v", help="Debug logging; pool files include scores")


def cli_errors(func):
    """Turn service errors into exit codes: validation -> 1, I/O -> 2"""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except OSError as e:
            logger.debug("I/O failure", exc_info=True)
            settings.stderr_console.print(f"error: {e}", style="red", markup=False, highlight=False)
            raise typer.Exit(code=EXIT_IO)
        except ValueError as e:
            logger.debug("Validation failure", exc_info=True)
            settings.stderr_console.print(f"error: {e}", style="red", markup=False, highlight=False)
            raise typer.Exit(code=EXIT_VALIDATION)

    return wrapper


def load_run_config(config: Optional[Path], seed: Optional[int] = None) -> RunConfig:
    if config is None:
        raise ValueError("--config is required for this command")
    run = RunConfig.from_yaml(config)
    return run.with_seed(seed) if seed is not None else run


def output_dir(out: Optional[Path], run: Optional[RunConfig] = None) -> Path:
    """--out wins over the config, which wins over TRIAGEKIT_OUTPUT_DIR"""
    if out is not None:
        return out
    if run is not None and run.output_dir is not None:
        return run.output_dir
    return settings.default_output_dir()


class PreparedData(NamedTuple):
    raw: RawDataset
    labeled: LabeledDataset
    train: LabeledDataset
    test: LabeledDataset


def prepare_data(run: RunConfig) -> PreparedData:
    """Load, filter and split the run's applicant file"""
    schema = load_schema(run.schema_path)
    run.check_against(schema)
    raw = load_dataset(run.data_path, schema)
    if run.exclusions:
        raw = filter_rows(raw, run.exclusions)
    if run.drop_duplicates:
        raw = drop_duplicates(raw)
    labeled = to_labeled(raw)
    train, test = split_train_test(labeled, run.test_fraction, run.seed)
    return PreparedData(raw=raw, labeled=labeled, train=train, test=test)
