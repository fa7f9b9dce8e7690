import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler

load_dotenv()

# Process-level settings
LOG_LEVEL = os.getenv("TRIAGEKIT_LOG_LEVEL", "INFO")
OUTPUT_DIR = os.getenv("TRIAGEKIT_OUTPUT_DIR", "out")
N_JOBS = int(os.getenv("TRIAGEKIT_N_JOBS", "1"))

BUNDLE_FILE = "model_bundle.json"
MANIFEST_FILE = "split_manifest.csv"
SCHEMA_FILE = "schema.yaml"
DATA_FILE = "applicants.csv"
TEST_DATA_FILE = "test_applicants.csv"

stderr_console = Console(stderr=True)


def configure_logging(verbose: bool = False):
    """Route all diagnostics to stderr through rich"""
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=stderr_console, show_path=False)],
        force=True,
    )


def default_output_dir() -> Path:
    return Path(OUTPUT_DIR)


def bundle_timestamp() -> datetime:
    """Timestamp recorded in bundles; SOURCE_DATE_EPOCH pins it for reproducible output"""
    epoch: Optional[str] = os.getenv("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return datetime.now(timezone.utc).replace(microsecond=0)
