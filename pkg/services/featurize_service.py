import logging
import math
import re
from collections import Counter
from functools import partial
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

from models.features import (
    MISSING,
    RARE,
    CategoricalEncoding,
    FeatureColumn,
    FeatureKind,
    FeatureMask,
    FeatureMatrix,
    FittedPipeline,
    NumericEncoding,
    PipelineConfig,
    TextEncoding,
)
from models.schema import ColumnRole, RawDataset

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: Optional[str]) -> List[str]:
    """Lowercase runs of letters/digits, keeping runs of length >= 2"""
    if not text:
        return []
    return [t for t in _TOKEN.findall(text.lower()) if len(t) >= 2]


def ngrams(tokens: List[str], ngram_range: Tuple[int, int] = (1, 2)) -> List[str]:
    terms = []
    if ngram_range[0] <= 1 <= ngram_range[1]:
        terms.extend(tokens)
    if ngram_range[0] <= 2 <= ngram_range[1]:
        terms.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return terms


def analyze(text: Optional[str], ngram_range: Tuple[int, int] = (1, 2)) -> List[str]:
    return ngrams(tokenize(text), ngram_range)


def fit_pipeline(train: RawDataset, config: Optional[PipelineConfig] = None) -> FittedPipeline:
    """Learn imputation placeholders, category vocabularies and text vocabularies from training rows"""
    config = config or PipelineConfig()
    if train.n_rows == 0:
        raise ValueError("cannot fit a pipeline on an empty dataset")

    schema = train.dataset_schema
    numeric, categorical, text, columns = [], [], [], []

    for spec in schema.feature_columns:
        values = train.column_values(spec.name)
        if spec.role == ColumnRole.NUMERIC:
            encoding = _fit_numeric(spec.name, values, config)
            numeric.append(encoding)
            columns.append(FeatureColumn(name=spec.name, source=spec.name, kind=FeatureKind.NUMERIC, groups=spec.groups))
            if encoding.has_indicator:
                columns.append(FeatureColumn(
                    name=f"{spec.name}_missing",
                    source=spec.name,
                    kind=FeatureKind.MISSING_INDICATOR,
                    groups=spec.groups,
                ))
        elif spec.role == ColumnRole.CATEGORICAL:
            encoding = _fit_categorical(spec.name, values, config)
            categorical.append(encoding)
            for category in encoding.outputs:
                columns.append(FeatureColumn(
                    name=f"{spec.name}={category}",
                    source=spec.name,
                    kind=FeatureKind.ONEHOT,
                    label=category,
                    groups=spec.groups,
                ))
        else:
            encoding = _fit_text(spec.name, values, config)
            text.append(encoding)
            for term in encoding.terms:
                columns.append(FeatureColumn(
                    name=f"{spec.name}:{term}",
                    source=spec.name,
                    kind=FeatureKind.TFIDF,
                    label=term,
                    groups=spec.groups,
                ))

    pipeline = FittedPipeline(
        dataset_schema=schema,
        config=config,
        numeric=numeric,
        categorical=categorical,
        text=text,
        columns=columns,
    )
    logger.info(
        f"Fitted pipeline on {train.n_rows} rows: {pipeline.n_columns} output columns "
        f"({len(numeric)} numeric, {len(categorical)} categorical, {len(text)} text sources)"
    )
    return pipeline


def transform(pipeline: FittedPipeline, data: RawDataset) -> FeatureMatrix:
    """Apply a fitted pipeline; never modifies the pipeline"""
    _check_compatible(pipeline, data)
    n = data.n_rows
    numeric = {e.column: e for e in pipeline.numeric}
    categorical = {e.column: e for e in pipeline.categorical}
    text = {e.column: e for e in pipeline.text}

    blocks = []
    for spec in pipeline.dataset_schema.feature_columns:
        values = data.column_values(spec.name)
        if spec.name in numeric:
            blocks.append(_transform_numeric(numeric[spec.name], values))
        elif spec.name in categorical:
            blocks.append(_transform_categorical(categorical[spec.name], values))
        else:
            blocks.append(_transform_text(text[spec.name], values, pipeline.config.tfidf_ngram_range))

    matrix = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(values=matrix.astype(np.float64, copy=False), columns=list(pipeline.columns))


def mask_for_groups(
        pipeline: FittedPipeline,
        exclude_groups: Iterable[str] = (),
        include_groups: Iterable[str] = (),
) -> FeatureMask:
    """Deselect columns whose source carries an excluded tag unless it also carries an included one"""
    exclude, include = set(exclude_groups), set(include_groups)
    unknown = (exclude | include) - pipeline.dataset_schema.all_groups
    if unknown:
        raise ValueError(f"unknown group(s): {', '.join(sorted(unknown))}")

    return np.array(
        [not (set(c.groups) & exclude) or bool(set(c.groups) & include) for c in pipeline.columns],
        dtype=bool,
    )


def parse_numeric(column: str, values: List[Optional[str]]) -> np.ndarray:
    """Float array with NaN where the cell is missing"""
    series = pd.Series(values, dtype=object)
    parsed = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64)
    bad = series.notna().to_numpy() & ~np.isfinite(parsed)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ValueError(f"column {column}: non-numeric value {values[row]!r} at row {row + 1}")
    return parsed


def _fit_numeric(column: str, values, config: PipelineConfig) -> NumericEncoding:
    parsed = parse_numeric(column, values)
    missing = np.isnan(parsed)
    if config.numeric_placeholder is not None:
        placeholder = float(config.numeric_placeholder)
    elif missing.all():
        placeholder = -1.0
    else:
        placeholder = float(np.nanmin(parsed)) - 1.0
    return NumericEncoding(column=column, placeholder=placeholder, has_indicator=bool(missing.any()))


def _fit_categorical(column: str, values, config: PipelineConfig) -> CategoricalEncoding:
    n = len(values)
    counts = Counter(MISSING if v is None else v for v in values)
    retained = sorted(c for c, count in counts.items() if count / n >= config.rare_threshold and c != RARE)
    rare = sorted(c for c in counts if c not in retained)
    if rare:
        logger.debug(f"Column {column}: merged {len(rare)} rare categories into {RARE}")
    return CategoricalEncoding(column=column, vocabulary=retained, rare=rare)


def _fit_text(column: str, values, config: PipelineConfig) -> TextEncoding:
    n_docs = len(values)
    doc_freq = Counter()
    for doc in values:
        doc_freq.update(set(analyze(doc, config.tfidf_ngram_range)))

    ranked = sorted(doc_freq.items(), key=lambda item: (-item[1], item[0]))
    ranked = ranked[:config.tfidf_max_features_per_column]
    terms = [term for term, _ in ranked]
    idf = [math.log((1 + n_docs) / (1 + df)) + 1.0 for _, df in ranked]
    return TextEncoding(column=column, terms=terms, idf=idf)


def _transform_numeric(encoding: NumericEncoding, values) -> np.ndarray:
    parsed = parse_numeric(encoding.column, values)
    missing = np.isnan(parsed)
    filled = np.where(missing, encoding.placeholder, parsed)
    if encoding.has_indicator:
        return np.column_stack([filled, missing.astype(np.float64)])
    return filled.reshape(-1, 1)


def _transform_categorical(encoding: CategoricalEncoding, values) -> np.ndarray:
    index = {category: i for i, category in enumerate(encoding.vocabulary)}
    rare_index = len(encoding.vocabulary)
    codes = np.array(
        [index.get(MISSING if v is None else v, rare_index) for v in values],
        dtype=np.int64,
    )
    onehot = np.zeros((len(values), rare_index + 1))
    onehot[np.arange(len(values)), codes] = 1.0
    return onehot


def _transform_text(encoding: TextEncoding, values, ngram_range: Tuple[int, int]) -> np.ndarray:
    if not encoding.terms:
        return np.zeros((len(values), 0))
    vectorizer = CountVectorizer(analyzer=partial(analyze, ngram_range=ngram_range), vocabulary=encoding.terms)
    counts = vectorizer.transform(["" if v is None else v for v in values]).astype(np.float64)
    weighted = counts @ sparse.diags(np.asarray(encoding.idf))
    return normalize(weighted, norm="l2").toarray()


def _check_compatible(pipeline: FittedPipeline, data: RawDataset):
    fitted = {(c.name, c.role) for c in pipeline.dataset_schema.feature_columns}
    given = {(c.name, c.role) for c in data.dataset_schema.feature_columns}
    if fitted != given:
        raise ValueError("schema mismatch: dataset feature columns differ from the fitted pipeline")
    absent = [name for name, _ in fitted if name not in data.frame.columns]
    if absent:
        raise ValueError(f"schema mismatch: dataset lacks column(s) {', '.join(sorted(absent))}")
