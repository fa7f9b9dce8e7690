import csv
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from models.schema import DatasetSchema, LabeledDataset, OutcomeVocabulary, RawDataset

logger = logging.getLogger(__name__)

TRUTHY_FLAGS = {"1", "true", "yes", "y", "t"}


def parse_schema(text: str) -> DatasetSchema:
    """Parse a YAML schema document into a validated DatasetSchema"""
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ValueError(f"invalid schema document: {e}") from e
    if not isinstance(document, dict) or "columns" not in document:
        raise ValueError("schema document must be a mapping with a 'columns' list")
    return DatasetSchema.model_validate(document)


def load_schema(path: Union[str, Path]) -> DatasetSchema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


def dump_schema(schema: DatasetSchema) -> str:
    return yaml.safe_dump(schema.model_dump(mode="json"), sort_keys=False)


def load_dataset(path: Union[str, Path], schema: DatasetSchema, allow_missing_outcome: bool = False) -> RawDataset:
    """Read a comma-delimited UTF-8 file whose header matches the schema columns as a set.

    With allow_missing_outcome, a file without the outcome column loads as an unlabeled feature view.
    """
    # utf-8-sig strips the byte-order mark spreadsheet exports put before the header
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file, expected a header row")

        names = schema.names
        if allow_missing_outcome and schema.outcome_column not in header:
            names = [n for n in names if n != schema.outcome_column]
        expected = set(names)
        missing = [name for name in names if name not in header]
        extra = [name for name in header if name not in expected]
        if missing:
            raise ValueError(f"{path}: header is missing column(s): {', '.join(missing)}")
        if extra:
            raise ValueError(f"{path}: header has unexpected column(s): {', '.join(extra)}")
        if len(header) != len(set(header)):
            raise ValueError(f"{path}: header repeats a column name")

        rows = []
        for record in reader:
            if not record:
                continue
            if len(record) != len(header):
                raise ValueError(
                    f"{path}: line {reader.line_num}: expected {len(header)} cells, found {len(record)}"
                )
            rows.append([cell if cell != "" else None for cell in record])

    frame = pd.DataFrame(rows, columns=header, dtype=object)
    frame = frame[names]
    logger.info(f"Loaded {len(frame)} rows from {path}")
    return RawDataset(dataset_schema=schema, frame=frame)


def write_dataset(data: RawDataset, path: Union[str, Path]):
    """Write the dataset back in the delimited format load_dataset reads"""
    data.frame.to_csv(path, index=False, na_rep="", lineterminator="\n", encoding="utf-8")


def map_outcome_label(raw_outcome: str, vocabulary: Optional[OutcomeVocabulary] = None) -> int:
    """Map a raw admission status to 1 (admit) or 0 (deny)"""
    vocabulary = vocabulary or OutcomeVocabulary()
    value = (raw_outcome or "").strip().lower()
    if value in {v.strip().lower() for v in vocabulary.positive}:
        return 1
    if value in {v.strip().lower() for v in vocabulary.negative}:
        return 0
    raise ValueError(f"unrecognized outcome: {raw_outcome!r}")


def to_labeled(data: RawDataset) -> LabeledDataset:
    """Split off the outcome column as binary labels and collect row identifiers"""
    schema = data.dataset_schema
    if not data.has_outcome:
        raise ValueError("dataset has no outcome column")

    labels = []
    for row, raw in enumerate(data.column_values(schema.outcome_column)):
        if raw is None:
            raise ValueError(f"row {row + 1}: missing outcome")
        labels.append(map_outcome_label(raw, schema.outcome_vocabulary))

    return LabeledDataset(
        features=_feature_view(data),
        labels=np.asarray(labels, dtype=np.int8),
        ids=row_ids(data),
    )


def row_ids(data: RawDataset) -> List[str]:
    id_column = data.dataset_schema.identifier_column
    if id_column is None:
        return [str(i) for i in range(data.n_rows)]

    ids = data.column_values(id_column)
    if any(v is None for v in ids):
        raise ValueError(f"identifier column {id_column} has missing values")
    if len(set(ids)) != len(ids):
        raise ValueError(f"identifier column {id_column} has duplicate values")
    return list(ids)


def outcome_labels_if_present(data: RawDataset) -> Optional[np.ndarray]:
    """Labels when every outcome cell is filled, None when the outcome column is blank"""
    schema = data.dataset_schema
    if not data.has_outcome:
        return None
    values = data.column_values(schema.outcome_column)
    if all(v is None for v in values):
        return None
    return to_labeled(data).labels


def split_train_test(data: LabeledDataset, test_fraction: float, seed: int) -> Tuple[LabeledDataset, LabeledDataset]:
    """Unstratified seeded partition; the test set takes the first round-half-up(n*fraction) rows of a PCG64 permutation"""
    if data.n_rows == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")

    n = data.n_rows
    n_test = int(math.floor(n * test_fraction + 0.5))
    permutation = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(permutation[:n_test])
    train_idx = np.sort(permutation[n_test:])

    train, test = data.take(train_idx), data.take(test_idx)
    logger.info(
        f"Split {n} rows into train={train.n_rows} (prevalence {train.prevalence:.4f}) "
        f"and test={test.n_rows} (prevalence {test.prevalence:.4f})"
    )
    return train, test


def drop_duplicates(data: RawDataset) -> RawDataset:
    """Drop rows identical in every non-identifier column, keeping the first"""
    id_column = data.dataset_schema.identifier_column
    subset = [c for c in data.frame.columns if c != id_column]
    frame = data.frame.drop_duplicates(subset=subset, keep="first").reset_index(drop=True)
    dropped = data.n_rows - len(frame)
    if dropped:
        logger.info(f"Dropped {dropped} duplicate rows")
    return RawDataset(dataset_schema=data.dataset_schema, frame=frame)


def filter_rows(data: RawDataset, exclusions: Mapping[str, Iterable[str]]) -> RawDataset:
    """Drop rows whose value in a column is listed under that column"""
    keep = np.ones(data.n_rows, dtype=bool)
    for column, values in exclusions.items():
        if column not in data.frame.columns:
            raise ValueError(f"exclusion refers to unknown column: {column}")
        excluded = {str(v).strip().lower() for v in values}
        cells = data.frame[column].map(lambda v: v is not None and v.strip().lower() in excluded)
        keep &= ~cells.to_numpy(dtype=bool)

    if keep.all():
        return data
    logger.info(f"Excluded {int((~keep).sum())} rows by column filters")
    return data.take(np.flatnonzero(keep))


def report_flags(data: RawDataset, tags: Iterable[str]) -> Dict[str, np.ndarray]:
    """Boolean membership per report-group tag, read from the one column carrying that tag"""
    schema = data.dataset_schema
    flags = {}
    for tag in tags:
        columns = schema.columns_with_group(tag)
        if len(columns) != 1:
            raise ValueError(f"report group {tag!r} must tag exactly one column, found {len(columns)}")
        values = data.column_values(columns[0])
        flags[tag] = np.array(
            [v is not None and v.strip().lower() in TRUTHY_FLAGS for v in values], dtype=bool
        )
    return flags


def _feature_view(data: RawDataset) -> RawDataset:
    outcome = data.dataset_schema.outcome_column
    frame = data.frame.drop(columns=[outcome]).reset_index(drop=True)
    return RawDataset(dataset_schema=data.dataset_schema, frame=frame)
