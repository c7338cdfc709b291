import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbeval.agreement import (DEFAULT_COLUMNS, Agreement, agreement_analysis, agreement_table,
                              classify_agreement, random_half_split)
from lbeval.stats import PairVerdict

from conftest import matrix_from


def v(better, significant):
    return PairVerdict(better, significant, 0.01 if significant else 0.5, "mean", 0.0)


@pytest.mark.parametrize("a, b, expected", [
    (v("A", True), v("A", True), Agreement.AGREE),
    (v("A", False), v("A", False), Agreement.AGREE),
    (v("A", False), v("B", False), Agreement.PARTIAL),
    (v("A", True), v("A", False), Agreement.PARTIAL),
    (v("A", True), v("B", False), Agreement.DISAGREE),
    (v("A", True), v("B", True), Agreement.DISAGREE),
    (v("tie", False), v("B", False), Agreement.AGREE),
    (v("tie", False), v("B", True), Agreement.PARTIAL),
    (v("tie", True), v("B", True), Agreement.AGREE),
])
def test_classification(a, b, expected):
    assert classify_agreement(a, b) == expected
    assert classify_agreement(b, a) == expected


def test_half_split_sizes_and_disjointness():
    q = [f"q{i}" for i in range(11)]
    h1, h2 = random_half_split(q, seed=3, index=7)
    assert len(h1) == 6 and len(h2) == 5
    assert set(h1) | set(h2) == set(q) and not set(h1) & set(h2)
    assert random_half_split(q, 3, 7) == (h1, h2)


def test_half_split_needs_two():
    with pytest.raises(ValueError):
        random_half_split(["q"], 0)


def test_constant_shift_sign_agrees():
    rng = np.random.default_rng(0)
    base = rng.uniform(0, 0.9, size=40)
    m = matrix_from([base + 0.1, base])
    rep = agreement_analysis(m, "sign", "mean", splits=100, seed=1)
    assert rep.agree_rate == 1.0 and rep.perc_signif == 1.0


def test_identical_runs_never_disagree():
    rng = np.random.default_rng(1)
    row = rng.random(20)
    m = matrix_from([row, row, rng.random(20)])
    for rep in agreement_table(m, splits=20, seed=2):
        assert rep.units == 60
    pair = matrix_from([row, row])
    for rep in agreement_table(pair, splits=20, seed=2):
        assert rep.disagree_rate == 0.0
        assert rep.agree_rate == 1.0


def test_degenerate_counts_reported():
    row = np.full(10, 0.5)
    rep = agreement_analysis(matrix_from([row, row]), "t", splits=5, seed=0)
    assert rep.degenerate == 10


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 5), st.integers(4, 16), st.integers(0, 10_000))
def test_rates_sum_and_perc_signif_shared(runs, queries, seed):
    rng = np.random.default_rng(seed)
    m = matrix_from(rng.integers(0, 5, size=(runs, queries)) / 4)
    reps = agreement_table(m, splits=8, seed=seed)
    by = {(r.test, r.aggregation): r for r in reps}
    for r in reps:
        assert r.agree_rate + r.partial_rate + r.disagree_rate == pytest.approx(1.0, abs=1e-12)
    for test in ("sign", "wx-rs", "wx-sr"):
        assert by[(test, "mean")].perc_signif == by[(test, "median")].perc_signif


def test_mean_and_median_can_pick_different_winners():
    import itertools
    from lbeval.stats import compare_pair
    found = None
    for a in itertools.product((0.0, 0.5, 1.0), repeat=5):
        for level in (0.1, 0.3, 0.6, 0.9):
            b = (level,) * 5
            winners = {compare_pair(a, b, "sign", g).better for g in ("mean", "median")}
            if winners == {"A", "B"}:
                found = (a, b)
                break
        if found:
            break
    assert found is not None


def test_default_columns_and_validation():
    assert len(DEFAULT_COLUMNS) == 7
    m = matrix_from([[0.1, 0.2], [0.3, 0.4]])
    with pytest.raises(ValueError):
        agreement_table(m, [("anova", "mean")])
    with pytest.raises(ValueError):
        agreement_table(matrix_from([[0.1, 0.2]]))
