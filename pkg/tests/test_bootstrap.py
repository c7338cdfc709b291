import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbeval.bootstrap import bootstrap_ranks, rank_order, rank_summary

from conftest import matrix_from


def exact_b_first_probability(a, b):
    """Enumerate every resample of the query indices; ties go to A."""
    n = len(a)
    wins = sum(1 for idx in itertools.product(range(n), repeat=n)
               if sum(b[i] for i in idx) > sum(a[i] for i in idx))
    return Fraction(wins, n**n)


def test_enumeration_oracle_value():
    assert exact_b_first_probability((1, 1, 1, 0), (0, 0, 0, 1)) == Fraction(13, 256)


def test_rank_order_stable_ties():
    assert rank_order(np.array([0.5, 0.7, 0.5])).tolist() == [2, 1, 3]


def test_dominance():
    m = matrix_from([[0.9, 0.8, 0.7], [0.1, 0.2, 0.3]])
    dist = bootstrap_ranks(m, trials=500, seed=1)
    assert dist.proportions[0, 0] == 1.0
    assert dist.expected_rank.tolist() == [1.0, 2.0]


def test_identical_runs_tie_to_first():
    m = matrix_from([[0.3, 0.6, 0.9, 0.1]] * 3)
    dist = bootstrap_ranks(m, trials=200, seed=5)
    np.testing.assert_array_equal(dist.counts, np.diag([200, 200, 200]))


def test_matches_enumeration_small():
    m = matrix_from([[1, 1, 1, 0], [0, 0, 0, 1]], ("A", "B"))
    trials = 20_000
    dist = bootstrap_ranks(m, trials=trials, seed=11)
    p = 13 / 256
    sd = (p * (1 - p) / trials) ** 0.5
    assert abs(dist.proportions[1, 0] - p) <= 3 * sd


def test_fixed_seed_bitwise():
    rng = np.random.default_rng(0)
    m = matrix_from(rng.random((5, 30)))
    assert bootstrap_ranks(m, 300, 42) == bootstrap_ranks(m, 300, 42)
    assert bootstrap_ranks(m, 300, 42) != bootstrap_ranks(m, 300, 43)


def test_trial_prefix_is_stable():
    # Trial t depends only on (seed, t), so fewer trials is a prefix of more.
    rng = np.random.default_rng(2)
    m = matrix_from(rng.random((4, 12)))
    small = bootstrap_ranks(m, 50, 9)
    big = bootstrap_ranks(m, 51, 9)
    assert (big.counts - small.counts).sum() == 4
    assert ((big.counts - small.counts) >= 0).all()


def test_median_aggregation_and_summary():
    m = matrix_from([[0.2, 0.9, 0.8], [0.5, 0.5, 0.5]], ("x", "y"))
    dist = bootstrap_ranks(m, 100, 0, "median")
    assert dist.aggregation == "median"
    assert dist.leaderboard_rank == (1, 2)
    rows = rank_summary(dist)
    assert [r.run_id for r in rows] == ["x", "y"]
    assert rows[0].min >= 1 and rows[1].max <= 2


@pytest.mark.parametrize("trials", [0, -1])
def test_bad_trials(trials):
    with pytest.raises(ValueError):
        bootstrap_ranks(matrix_from([[0.1]]), trials)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_doubly_stochastic(runs, queries, seed):
    rng = np.random.default_rng(seed)
    m = matrix_from(rng.integers(0, 4, size=(runs, queries)) / 4)
    p = bootstrap_ranks(m, 64, seed).proportions
    np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
