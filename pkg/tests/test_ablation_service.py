import numpy as np
import pytest

from conftest import holdout_split
from models.ablation import AblationVariant, default_variants
from models.features import PipelineConfig
from models.gbdt import TrainConfig
from models.schema import LabeledDataset, RawDataset
from models.synth import GeneratorConfig, NumericFeatureSpec
from services.ablation_service import APPLICANT_POOL, HEURISTIC_POOL, AblationService, table_rows
from services.evaluation_service import heuristic_scores
from services.synth_service import generate_dataset

GROUPS = ["urm", "female", "legacy"]


@pytest.fixture(scope="module")
def split_with_constant():
    """Synthetic applicants plus a constant column tagged "noop" that no tree can split on"""
    config = GeneratorConfig(n_rows=800, seed=5)
    numeric = list(config.numeric) + [NumericFeatureSpec(name="constant", scale=0.0, groups=["noop"])]
    dataset = generate_dataset(config.model_copy(update={"numeric": numeric}))
    return holdout_split(dataset.data)


@pytest.fixture
def service(compact_pipeline_config, fast_train_config):
    return AblationService(compact_pipeline_config, fast_train_config, n_jobs=1)


@pytest.fixture(scope="module")
def default_report(holdout):
    k = int(0.1 * holdout.test.n_rows)
    service = AblationService(PipelineConfig(tfidf_max_features_per_column=16), TrainConfig(n_stages=15, seed=3), 1)
    return service.run_variants(
        holdout.train,
        holdout.test,
        default_variants(),
        k=k,
        report_groups=GROUPS,
        baseline_exclude_groups=["standardized_tests"],
        heuristic_scores=heuristic_scores(holdout.test.features, "sat_total"),
    )


def test_service_defaults():
    service = AblationService()
    assert service.pipeline_config is None
    assert service.train_config == TrainConfig()
    assert service.n_jobs >= 1


def test_baseline_only(holdout, service):
    report = service.run_variants(holdout.train, holdout.test, [AblationVariant(name="baseline")], k=20)
    (baseline,) = report.variants
    assert baseline.capture_test is None
    assert baseline.composition_tests == {}
    assert report.baseline is baseline
    assert baseline.capture_rate == pytest.approx(baseline.admits_captured / report.total_admits)
    assert [r.label for r in report.reference_rows] == [APPLICANT_POOL]


def test_noop_variant_matches_baseline(split_with_constant, service):
    train, test, _ = split_with_constant
    variants = [AblationVariant(name="baseline"), AblationVariant(name="no_constant", exclude_groups=["noop"])]
    report = service.run_variants(train, test, variants, k=int(0.1 * test.n_rows))
    baseline, noop = report.variants
    assert noop.n_features_used == baseline.n_features_used - 1
    assert noop.admits_captured == baseline.admits_captured
    assert noop.capture_test.chi2 == 0.0
    assert noop.capture_test.p_two_sided == 1.0
    assert noop.recall_curve == baseline.recall_curve


def test_excluded_columns_can_be_shuffled_without_changing_the_variant(holdout, service):
    test = holdout.test
    sensitive = test.features.dataset_schema.columns_with_group("sensitive")
    assert sensitive
    frame = test.features.frame.copy()
    frame[sensitive] = frame[sensitive].sample(frac=1.0, random_state=13).to_numpy()
    shuffled = LabeledDataset(
        features=RawDataset(dataset_schema=test.features.dataset_schema, frame=frame),
        labels=test.labels,
        ids=test.ids,
    )

    variant = [AblationVariant(name="remove_sensitive", exclude_groups=["sensitive"])]
    k = int(0.1 * test.n_rows)
    (original,) = service.run_variants(holdout.train, test, variant, k=k).variants
    (permuted,) = service.run_variants(holdout.train, shuffled, variant, k=k).variants
    assert permuted.admits_captured == original.admits_captured
    assert permuted.recall_curve == original.recall_curve


def test_default_variants(default_report, holdout):
    assert [v.name for v in default_report.variants] == [
        "baseline", "remove_sat_subject", "add_standardized_tests", "remove_sensitive",
    ]
    assert default_report.k == int(0.1 * holdout.test.n_rows)
    assert default_report.total_admits == int(holdout.test.labels.sum())

    baseline = default_report.variant("baseline")
    assert default_report.variant("add_standardized_tests").n_features_used > baseline.n_features_used
    assert default_report.variant("remove_sat_subject").n_features_used < baseline.n_features_used
    assert default_report.variant("remove_sensitive").n_features_used < baseline.n_features_used
    for result in default_report.variants:
        assert 0 <= result.admits_captured <= min(default_report.k, default_report.total_admits)
        assert set(result.composition) == set(GROUPS)
        assert all(0.0 <= share <= 1.0 for share in result.composition.values())


def test_reference_rows(default_report, holdout):
    applicants, heuristic = default_report.reference_rows
    assert applicants.label == APPLICANT_POOL
    assert applicants.size == holdout.test.n_rows
    assert applicants.admits_captured is None
    assert heuristic.label == HEURISTIC_POOL
    assert heuristic.size == default_report.k
    assert heuristic.capture_rate == pytest.approx(heuristic.admits_captured / default_report.total_admits)


def test_table_rows(default_report):
    rows = table_rows(default_report)
    assert [r["variant"] for r in rows] == [
        APPLICANT_POOL, HEURISTIC_POOL, "baseline", "remove_sat_subject", "add_standardized_tests", "remove_sensitive",
    ]
    assert rows[0]["admitted_capture_pct"] is None
    assert rows[2]["chi2_vs_baseline"] is None
    baseline = default_report.baseline
    assert rows[2]["admitted_capture_pct"] == pytest.approx(100 * baseline.capture_rate)
    assert rows[2]["urm_pct"] == pytest.approx(100 * baseline.composition["urm"])


def test_variant_order_does_not_change_fits(holdout, service):
    variants = default_variants()
    forward = service.run_variants(holdout.train, holdout.test, variants, k=20)
    backward = service.run_variants(holdout.train, holdout.test, variants[::-1], k=20)
    assert [v.name for v in backward.variants] == [v.name for v in variants[::-1]]
    for result in forward.variants:
        other = backward.variant(result.name)
        assert other.admits_captured == result.admits_captured
        assert other.recall_curve == result.recall_curve


def test_run_variants_errors(holdout, service):
    train, test = holdout.train, holdout.test
    with pytest.raises(ValueError, match="at least one variant"):
        service.run_variants(train, test, [], k=10)
    with pytest.raises(ValueError, match="unique"):
        service.run_variants(train, test, [AblationVariant(name="a"), AblationVariant(name="a")], k=10)
    with pytest.raises(ValueError, match="outside"):
        service.run_variants(train, test, default_variants(), k=test.n_rows + 1)
    with pytest.raises(ValueError, match="unknown group"):
        service.run_variants(train, test, [AblationVariant(name="a", exclude_groups=["nonexistent"])], k=10)

    no_admits = LabeledDataset(
        features=test.features,
        labels=np.zeros(test.n_rows, dtype=np.int8),
        ids=test.ids,
    )
    with pytest.raises(ValueError, match="no admitted applicants"):
        service.run_variants(train, no_admits, default_variants(), k=10)


def test_variant_rejects_overlapping_groups():
    with pytest.raises(ValueError):
        AblationVariant(name="both", exclude_groups=["sensitive"], include_groups=["sensitive"])
