import numpy as np
import pytest

from conftest import random_scores
from services.pooling_service import bottom_k_pool, pool_sizes, quantile_pools, summarize_pools, top_k_pool


def test_top_k_pool_tie_goes_to_earlier_row():
    assert top_k_pool([0.9, 0.5, 0.5, 0.1], 2).tolist() == [0, 1]


def test_top_k_pool_bounds():
    scores = random_scores(12)
    assert top_k_pool(scores, 12).tolist() == list(range(12))
    assert top_k_pool(scores, 0).tolist() == []
    with pytest.raises(ValueError):
        top_k_pool(scores, 13)


def test_bottom_k_pool_is_complement_of_top():
    scores = [0.9, 0.5, 0.5, 0.1]
    assert bottom_k_pool(scores, 1).tolist() == [3]
    assert bottom_k_pool(scores, 2).tolist() == [2, 3]
    assert bottom_k_pool(scores, 0).tolist() == []


def test_quantile_pools_even_split():
    scores = np.arange(20) / 20
    assignment = quantile_pools(scores, 10)
    assert assignment.sizes() == [2] * 10
    assert sorted(assignment.members(10).tolist()) == [18, 19]


def test_quantile_pools_remainder_goes_to_highest_pools():
    assignment = quantile_pools(random_scores(25), 10)
    assert assignment.sizes() == [3, 3, 3, 3, 3, 2, 2, 2, 2, 2]
    assert pool_sizes(25, 10) == [3, 3, 3, 3, 3, 2, 2, 2, 2, 2]


def test_quantile_pools_equal_scores_are_stable():
    assignment = quantile_pools(np.full(20, 0.3), 10)
    assert assignment.members(10).tolist() == [0, 1]
    assert assignment.members(1).tolist() == [18, 19]


def test_quantile_pools_needs_enough_applicants():
    with pytest.raises(ValueError):
        quantile_pools(random_scores(9), 10)


@pytest.mark.parametrize("n, seed", [(10, 0), (37, 1), (265, 2), (1001, 3)])
def test_quantile_pools_invariants(n, seed):
    scores = np.round(random_scores(n, seed), 2)
    assignment = quantile_pools(scores, 10)
    sizes = assignment.sizes()

    assert sum(sizes) == n
    assert max(sizes) - min(sizes) <= 1
    for j in range(2, 11):
        assert scores[assignment.members(j)].min() >= scores[assignment.members(j - 1)].max()
    assert sorted(top_k_pool(scores, sizes[0]).tolist()) == sorted(assignment.members(10).tolist())

    summaries = summarize_pools(assignment)
    weighted = sum(s.size * s.predicted_admit_rate for s in summaries) / n
    assert weighted == pytest.approx(scores.mean(), abs=1e-12)


def test_summarize_pools_predicted_rate_is_mean_score():
    assignment = quantile_pools([0.8, 0.6, 0.4, 0.2], 1)
    (summary,) = summarize_pools(assignment)
    assert summary.predicted_admit_rate == pytest.approx(0.5)
    assert summary.actual_admit_rate is None
    assert summary.ci_low is None


def test_summarize_pools_actual_rate_and_interval():
    assignment = quantile_pools(random_scores(10), 1)
    labels = np.array([1, 0] * 5)
    (summary,) = summarize_pools(assignment, labels)
    assert summary.admits == 5
    assert summary.actual_admit_rate == 0.5
    assert summary.ci_low == pytest.approx(0.187, abs=1e-3)
    assert summary.ci_high == pytest.approx(0.813, abs=1e-3)


def test_summarize_pools_orders_top_pool_first():
    summaries = summarize_pools(quantile_pools(random_scores(30), 3), np.zeros(30, dtype=int))
    assert [s.pool_index for s in summaries] == [3, 2, 1]
    assert all(s.ci_low <= s.actual_admit_rate <= s.ci_high for s in summaries)


def test_summarize_pools_within_subgroup():
    assignment = quantile_pools(np.arange(8) / 8, 2)
    labels = np.array([0, 0, 1, 0, 1, 1, 0, 1])
    within = np.array([True, False, True, False, True, False, True, False])
    top, bottom = summarize_pools(assignment, labels, within=within)
    assert (top.size, top.admits) == (2, 1)
    assert (bottom.size, bottom.admits) == (2, 1)


def test_summarize_pools_rejects_misaligned_labels():
    assignment = quantile_pools(random_scores(10), 2)
    with pytest.raises(ValueError):
        summarize_pools(assignment, np.zeros(9, dtype=int))
