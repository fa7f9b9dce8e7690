from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional

import numpy as np
import pandas as pd
import pytest
import yaml

from models.features import PipelineConfig
from models.gbdt import TrainConfig
from models.run import BundleMetadata, ModelBundle
from models.schema import DatasetSchema, LabeledDataset, RawDataset
from models.synth import GeneratorConfig
from services.featurize_service import fit_pipeline, mask_for_groups, transform
from services.gbdt_service import fit_gbdt
from services.ingest_service import parse_schema, split_train_test, to_labeled
from services.synth_service import generate_dataset, write_synthetic

PINNED_EPOCH = 1700000000

SMALL_SCHEMA = """
columns:
  - {name: applicant_id, role: identifier}
  - {name: gpa, role: numeric}
  - {name: major, role: categorical}
  - {name: essay_topics, role: text}
  - {name: sat_total, role: numeric, groups: [standardized_tests]}
  - {name: age, role: numeric, groups: [sensitive]}
  - {name: female, role: categorical, groups: [sensitive, female]}
  - {name: decision, role: outcome}
"""


def make_raw(schema: DatasetSchema, rows: List[Dict[str, Optional[str]]]) -> RawDataset:
    """RawDataset from row dicts; absent keys become missing cells"""
    names = schema.names
    if not any(schema.outcome_column in row for row in rows):
        names = [n for n in names if n != schema.outcome_column]
    frame = pd.DataFrame([[row.get(n) for n in names] for row in rows], columns=names, dtype=object)
    return RawDataset(dataset_schema=schema, frame=frame)


@pytest.fixture
def small_schema() -> DatasetSchema:
    return parse_schema(SMALL_SCHEMA)


@pytest.fixture
def small_rows() -> List[Dict[str, Optional[str]]]:
    return [
        {"applicant_id": "a1", "gpa": "3.9", "major": "math", "essay_topics": "robotics research",
         "sat_total": "1450", "age": "17", "female": "1", "decision": "Admitted"},
        {"applicant_id": "a2", "gpa": None, "major": "art", "essay_topics": "painting club",
         "sat_total": "1200", "age": "18", "female": "0", "decision": "Denied"},
        {"applicant_id": "a3", "gpa": "3.2", "major": "math", "essay_topics": None,
         "sat_total": None, "age": None, "female": "1", "decision": "Wait-listed"},
        {"applicant_id": "a4", "gpa": "3.6", "major": "history", "essay_topics": "debate club research",
         "sat_total": "1320", "age": "17", "female": "0", "decision": "Conditionally Admitted"},
    ]


@pytest.fixture
def small_raw(small_schema, small_rows) -> RawDataset:
    return make_raw(small_schema, small_rows)


@pytest.fixture(autouse=True)
def pinned_timestamp(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", str(PINNED_EPOCH))


@pytest.fixture(scope="session")
def synthetic():
    return generate_dataset(GeneratorConfig(n_rows=800, seed=3))


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(n_stages=15, seed=3)


@pytest.fixture
def compact_pipeline_config() -> PipelineConfig:
    return PipelineConfig(tfidf_max_features_per_column=16)


@pytest.fixture
def run_config_path(tmp_path, synthetic) -> Path:
    """A run config over a freshly written synthetic applicant file, tuned for quick fits"""
    data_dir = tmp_path / "data"
    write_synthetic(synthetic, data_dir)
    config = {
        "data_path": "data/applicants.csv",
        "schema_path": "data/schema.yaml",
        "output_dir": "out",
        "seed": 11,
        "exclusions": {"recruited_athlete": ["Y"]},
        "pipeline": {"tfidf_max_features_per_column": 16},
        "train": {"n_stages": 10, "seed": 11},
        "pooling": {"top_fraction": 0.3},
        "report_groups": ["urm", "female", "legacy"],
        "baseline_score_column": "sat_total",
    }
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


def random_scores(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).random(n)


class Holdout(NamedTuple):
    train: LabeledDataset
    test: LabeledDataset
    test_raw: RawDataset


def holdout_split(data: RawDataset, test_fraction: float = 0.25, seed: int = 3) -> Holdout:
    """Split plus the held-out rows with their outcome column, as evaluation reads them"""
    labeled = to_labeled(data)
    train, test = split_train_test(labeled, test_fraction, seed)
    position = {applicant: row for row, applicant in enumerate(labeled.ids)}
    return Holdout(train, test, data.take([position[i] for i in test.ids]))


def build_bundle(
        train: LabeledDataset,
        test: LabeledDataset,
        pipeline_config: PipelineConfig,
        train_config: TrainConfig,
        exclude_groups: Iterable[str] = (),
) -> ModelBundle:
    pipeline = fit_pipeline(train.features, pipeline_config)
    mask = mask_for_groups(pipeline, exclude_groups)
    model = fit_gbdt(transform(pipeline, train.features), train.labels, train_config, mask)
    return ModelBundle(
        dataset_schema=train.features.dataset_schema,
        pipeline=pipeline,
        model=model,
        metadata=BundleMetadata(
            seed=train_config.seed,
            test_fraction=test.n_rows / (train.n_rows + test.n_rows),
            n_train=train.n_rows,
            n_test=test.n_rows,
            train_prevalence=train.prevalence,
            test_prevalence=test.prevalence,
            created_at=datetime.fromtimestamp(PINNED_EPOCH, tz=timezone.utc),
            excluded_groups=sorted(exclude_groups),
        ),
    )


@pytest.fixture(scope="session")
def holdout(synthetic) -> Holdout:
    return holdout_split(synthetic.data)


@pytest.fixture(scope="session")
def bundle(holdout) -> ModelBundle:
    return build_bundle(
        holdout.train,
        holdout.test,
        PipelineConfig(tfidf_max_features_per_column=16),
        TrainConfig(n_stages=15, seed=3),
        exclude_groups=["standardized_tests"],
    )
