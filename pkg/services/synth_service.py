import logging
import math
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit, logit

import settings
from models.schema import ColumnRole, ColumnSpec, DatasetSchema, RawDataset
from models.synth import GeneratorConfig, SyntheticDataset
from services.ingest_service import dump_schema, write_dataset

logger = logging.getLogger(__name__)

ADMIT_OUTCOMES = ["Admitted", "Conditionally Admitted"]
ADMIT_OUTCOME_P = [0.9, 0.1]
DENY_OUTCOMES = ["Denied", "Wait-listed", "Withdrawn"]
DENY_OUTCOME_P = [0.8, 0.15, 0.05]


def synth_schema(config: GeneratorConfig) -> DatasetSchema:
    columns = [ColumnSpec(name=config.id_column, role=ColumnRole.IDENTIFIER)]
    columns += [ColumnSpec(name=s.name, role=ColumnRole.NUMERIC, groups=s.groups) for s in config.numeric]
    columns += [ColumnSpec(name=s.name, role=ColumnRole.CATEGORICAL, groups=s.groups) for s in config.categorical]
    columns += [ColumnSpec(name=s.name, role=ColumnRole.TEXT, groups=s.groups) for s in config.text]
    columns += [ColumnSpec(name=s.name, role=ColumnRole.NUMERIC, groups=s.groups) for s in config.proxy_scores]
    columns.append(ColumnSpec(name=config.outcome_column, role=ColumnRole.OUTCOME))
    return DatasetSchema(columns=columns)


def latent_score(config: GeneratorConfig, numeric_z: np.ndarray, categorical_codes: Sequence[np.ndarray]) -> np.ndarray:
    """Noise-free applicant strength: weighted standard-normal draws plus per-level effects"""
    weights = np.array([s.weight for s in config.numeric], dtype=np.float64)
    u = numeric_z @ weights if len(weights) else np.zeros(numeric_z.shape[0])
    for spec, codes in zip(config.categorical, categorical_codes):
        u = u + np.asarray(spec.level_effects)[codes]
    return u


def admit_probability(latent, intercept: float, temperature: float = 1.0) -> np.ndarray:
    return expit(intercept + np.asarray(latent, dtype=np.float64) / temperature)


def calibrate_intercept(latent: np.ndarray, base_rate: float, temperature: float = 1.0) -> float:
    """Intercept whose mean admit probability over the latent scores equals base_rate"""
    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if admit_probability(latent, mid, temperature).mean() < base_rate:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def generate_dataset(config: GeneratorConfig) -> SyntheticDataset:
    """Draw a reproducible applicant file from one seeded generator"""
    rng = np.random.default_rng(config.seed)
    n = config.n_rows

    numeric_z = rng.standard_normal((n, len(config.numeric)))
    codes = [rng.choice(len(s.levels), size=n, p=s.probabilities) for s in config.categorical]
    latent = latent_score(config, numeric_z, codes) + config.latent_noise_std * rng.standard_normal(n)

    intercept = calibrate_intercept(latent, config.base_admit_rate, config.label_temperature)
    probability = admit_probability(latent, intercept, config.label_temperature)
    labels = (rng.random(n) < probability).astype(np.int8)
    admit_pick = rng.choice(len(ADMIT_OUTCOMES), size=n, p=ADMIT_OUTCOME_P)
    deny_pick = rng.choice(len(DENY_OUTCOMES), size=n, p=DENY_OUTCOME_P)

    cells = {config.id_column: [f"A{i + 1:06d}" for i in range(n)]}
    for j, spec in enumerate(config.numeric):
        values = spec.loc + spec.scale * numeric_z[:, j]
        if spec.low is not None or spec.high is not None:
            values = np.clip(values, spec.low, spec.high)
        cells[spec.name] = _format_numbers(values, spec.decimals)
    for spec, level_codes in zip(config.categorical, codes):
        cells[spec.name] = [spec.levels[c] for c in level_codes]
    for spec in config.text:
        cells[spec.name] = _draw_documents(rng, spec, latent)
    for spec in config.proxy_scores:
        raw = spec.offset + spec.scale * (latent + spec.noise_std * rng.standard_normal(n))
        values = np.round(np.clip(raw, spec.low, spec.high) / spec.step) * spec.step
        cells[spec.name] = _format_numbers(values, _step_decimals(spec.step))

    for spec in list(config.numeric) + list(config.categorical) + list(config.proxy_scores):
        if spec.missing_rate > 0:
            blank = rng.random(n) < spec.missing_rate
            cells[spec.name] = [None if b else v for v, b in zip(cells[spec.name], blank)]

    cells[config.outcome_column] = [
        ADMIT_OUTCOMES[a] if y else DENY_OUTCOMES[d] for y, a, d in zip(labels, admit_pick, deny_pick)
    ]

    schema = synth_schema(config)
    frame = pd.DataFrame({name: cells[name] for name in schema.names}, dtype=object)
    logger.info(
        f"Generated {n} applicants (seed {config.seed}): prevalence {labels.mean():.4f}, "
        f"target {config.base_admit_rate}, intercept {intercept:.4f}"
    )
    return SyntheticDataset(
        data=RawDataset(dataset_schema=schema, frame=frame),
        labels=labels,
        latent=latent,
        admit_probability=probability,
        intercept=intercept,
    )


def write_synthetic(dataset: SyntheticDataset, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """Write the schema document and the applicant file"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema_path = out_dir / settings.SCHEMA_FILE
    data_path = out_dir / settings.DATA_FILE
    schema_path.write_text(dump_schema(dataset.data.dataset_schema), encoding="utf-8")
    write_dataset(dataset.data, data_path)
    logger.info(f"Wrote {schema_path} and {data_path}")
    return schema_path, data_path


def _draw_documents(rng: np.random.Generator, spec, latent: np.ndarray) -> List[str]:
    n = len(latent)
    lengths = rng.integers(spec.tokens_per_doc[0], spec.tokens_per_doc[1] + 1, size=n)
    p_signal = expit(logit(spec.base_signal_rate) + spec.weight * latent)

    total = int(lengths.sum())
    owner = np.repeat(np.arange(n), lengths)
    is_signal = rng.random(total) < p_signal[owner]
    signal = np.asarray(spec.signal_terms, dtype=object)[rng.integers(len(spec.signal_terms), size=total)]
    neutral = np.asarray(spec.neutral_terms, dtype=object)[rng.integers(len(spec.neutral_terms), size=total)]
    words = np.where(is_signal, signal, neutral)

    docs = np.split(words, np.cumsum(lengths)[:-1])
    return [" ".join(doc) if len(doc) else None for doc in docs]


def _format_numbers(values: np.ndarray, decimals: int) -> List[str]:
    # +0.0 keeps rounded negatives from printing as "-0"
    return [f"{v + 0.0:.{decimals}f}" for v in np.round(values, decimals)]


def _step_decimals(step: float) -> int:
    if float(step).is_integer():
        return 0
    return max(0, -math.floor(math.log10(step))) + 1
