"""Acceptance criteria, one test each, at the stated tolerances and time budgets.

Each test records a single ``[PASS]``/``[FAIL]`` line; the lines are printed
in criterion order at the end of the pytest session. Run just this file with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import datetime as dt
import math
import random
import sys
import time
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from conftest import manifest_from, matrix_from, mirrored_setup, overfit_setup  # noqa: E402

from lbeval.agreement import agreement_table  # noqa: E402
from lbeval.bootstrap import bootstrap_ranks  # noqa: E402
from lbeval.holdout import holdout_compare  # noqa: E402
from lbeval.metrics import (MetricMatrix, MetricSpec, average_precision, ncg, ndcg,  # noqa: E402
                            reciprocal_rank)
from lbeval.monitor import (baseline_score_from, check_submission_policy, group_stats,  # noqa: E402
                            sota_trajectory)
from lbeval.scale import enumerate_states, metric_value_set, metric_values_by_state, scale_check  # noqa: E402
from lbeval.stats import paired_t, sign_test, wilcoxon_rank_sum, wilcoxon_signed_rank  # noqa: E402

RESULTS = {}


def report(number, title, fn):
    """Run one criterion and record its verdict line; failures are re-raised."""
    start = time.perf_counter()
    try:
        detail = fn()
    except AssertionError as exc:
        reason = " ".join(str(exc).split())
        RESULTS[number] = f"[FAIL] criterion {number}: {title} ({reason})"
        raise
    elapsed = time.perf_counter() - start
    RESULTS[number] = f"[PASS] criterion {number}: {title} ({detail}; {elapsed:.2f}s)"


def best_time(fn, repeats=20):
    fn()  # warm caches and imports
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


# 1 ------------------------------------------------------------------------

def criterion_1():
    spec = MetricSpec("RR", 3)

    def work():
        space = enumerate_states(3, 2)
        by_state = dict(zip(space.states, metric_values_by_state(space, spec)))
        return [by_state[s] for s in space.descending()], metric_value_set(space, spec)

    elapsed, (values, value_set) = best_time(work)
    assert values == [1, 1, 1, 1, F(1, 2), F(1, 2), F(1, 3), 0], values
    assert value_set == (0, F(1, 3), F(1, 2), 1), value_set
    assert elapsed < 1e-3, f"took {elapsed * 1e3:.3f} ms"
    return f"exact values, {elapsed * 1e6:.0f} us"


def test_criterion_1_rr_state_table():
    report(1, "RR values over n=3, g=2 states", criterion_1)


# 2 ------------------------------------------------------------------------

def criterion_2():
    elapsed, res = best_time(lambda: scale_check(3, 2, MetricSpec("RR", 3)))
    assert not res.equi_spaced and not res.solvable
    ce = res.counterexample
    assert ce.delta == F(1, 6), ce
    assert set(ce.missing) == {F(1, 6), F(5, 6)}, ce.missing
    assert elapsed < 1e-2, f"took {elapsed * 1e3:.3f} ms"
    return f"witness gap 1/6, missing 1/6 and 5/6, {elapsed * 1e3:.2f} ms"


def test_criterion_2_rr_solvability():
    report(2, "RR@3 fails solvability", criterion_2)


# 3 ------------------------------------------------------------------------

def _tie_free_diffs(rng, n):
    mags = rng.sample(range(1, 1000), n)
    return [m * rng.choice((-1, 1)) / 997 for m in mags]


def criterion_3():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    checked = 0
    worst = 0.0
    for _ in range(4000):
        n = rng.randint(1, 20)
        d = _tie_free_diffs(rng, n)
        worst = max(worst, abs(sign_test(d).p_value - oracles.sign_p(d)))
        checked += 1
    for _ in range(4000):
        n = rng.randint(1, 12)
        d = _tie_free_diffs(rng, n)
        worst = max(worst, abs(wilcoxon_signed_rank(d).p_value - oracles.signed_rank_p(d)))
        checked += 1
    for _ in range(2500):
        total = rng.randint(2, 10)
        n = rng.randint(1, total - 1)
        pool = [v / 7 for v in rng.sample(range(1000), total)]
        xs, ys = pool[:n], pool[n:]
        worst = max(worst, abs(wilcoxon_rank_sum(xs, ys).p_value - oracles.rank_sum_p(xs, ys)))
        checked += 1
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-12, f"max |p - oracle| = {worst:.3e}"
    assert elapsed < 60, f"took {elapsed:.1f} s"
    return f"{checked} inputs, max |dp| = {worst:.1e}"


def test_criterion_3_exact_tests_match_enumeration():
    report(3, "exact tests equal enumeration oracles", criterion_3)


# 4 ------------------------------------------------------------------------

def criterion_4():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 51))
        d = rng.normal(rng.uniform(-0.5, 0.5), rng.uniform(0.2, 2.0), size=n)
        res = paired_t(d)
        worst = max(worst, abs(res.p_value - oracles.t_two_sided_quad(res.statistic, n - 1)))
    assert worst <= 1e-6, f"max |p - oracle| = {worst:.3e}"
    return f"100 vectors, max |dp| = {worst:.1e}"


def test_criterion_4_t_test_reference():
    report(4, "paired t vs numerical integration", criterion_4)


# 5 ------------------------------------------------------------------------

def criterion_5():
    rng = np.random.default_rng(5)
    # (a) doubly stochastic
    for _ in range(20):
        runs, queries = int(rng.integers(2, 9)), int(rng.integers(2, 30))
        p = bootstrap_ranks(matrix_from(rng.integers(0, 5, (runs, queries)) / 4), 200,
                            int(rng.integers(1 << 30))).proportions
        assert np.abs(p.sum(axis=0) - 1).max() <= 1e-12 and np.abs(p.sum(axis=1) - 1).max() <= 1e-12
    # (b) dominance
    dom = bootstrap_ranks(matrix_from([[0.6, 0.7, 0.9], [0.5, 0.6, 0.8]]), 1000, 0)
    assert dom.proportions[0, 0] == 1.0
    # (c) enumeration probability
    trials = 100_000
    ab = bootstrap_ranks(matrix_from([[1, 1, 1, 0], [0, 0, 0, 1]], ("A", "B")), trials, 20240)
    p = 13 / 256
    sigma = math.sqrt(p * (1 - p) / trials)
    observed = ab.proportions[1, 0]
    assert abs(observed - p) <= 3 * sigma, f"B first {observed:.5f}, expected {p:.5f} +- {3 * sigma:.5f}"
    # (d) bitwise determinism, including the serialized report
    from lbeval.report import emit_report
    m = matrix_from(rng.random((6, 50)))
    assert emit_report(bootstrap_ranks(m, 500, 9), "json") == emit_report(bootstrap_ranks(m, 500, 9), "json")
    # performance
    big = MetricMatrix(MetricSpec("RR", 10), tuple(f"r{i}" for i in range(40)),
                       tuple(f"q{j}" for j in range(5800)), rng.random((40, 5800)))
    t0 = time.perf_counter()
    bootstrap_ranks(big, 1000, 1)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5, f"1000 x 40 x 5800 took {elapsed:.2f} s"
    return f"B first {observed:.5f} vs {p:.5f} (3 sigma {3 * sigma:.5f}), 1000x40x5800 in {elapsed:.2f} s"


def test_criterion_5_bootstrap():
    report(5, "bootstrap correctness and speed", criterion_5)


# 6 ------------------------------------------------------------------------

COLUMNS = [(t, g) for t in ("sign", "wx-rs", "wx-sr", "t") for g in ("mean", "median")]


def criterion_6():
    rng = np.random.default_rng(6)
    base = rng.uniform(0, 0.9, 40)
    shift = agreement_table(matrix_from([base + 0.1, base]), [("sign", "mean")], 100, 1, 0.05)[0]
    assert shift.agree_rate == 1.0, shift
    for trial in range(10):
        m = matrix_from(rng.integers(0, 5, (int(rng.integers(2, 6)), int(rng.integers(4, 30)))) / 4)
        reps = {(r.test, r.aggregation): r for r in agreement_table(m, COLUMNS, 20, trial)}
        for r in reps.values():
            total = r.agree_rate + r.partial_rate + r.disagree_rate
            assert abs(total - 1) <= 1e-12, r
        for t in ("sign", "wx-rs", "wx-sr", "t"):
            assert reps[(t, "mean")].perc_signif == reps[(t, "median")].perc_signif
    row = rng.random(30)
    for r in agreement_table(matrix_from([row, row]), COLUMNS, 50, 3):
        assert r.disagree_rate == 0, r
    return "shift pair agree_rate 1.0, rates sum to 1, perc. signif. shared, no disagree on twins"


def test_criterion_6_agreement():
    report(6, "split-half agreement protocol", criterion_6)


# 7 ------------------------------------------------------------------------

def criterion_7():
    rr = MetricSpec("RR", 10)
    runs, part, qrels = overfit_setup()
    rep = holdout_compare(runs, part, [qrels], [rr], trials=200, seed=7)
    pub = rep.condition("public", "sparse", rr).rank_of("overfit")
    priv = rep.condition("private", "sparse", rr).rank_of("overfit")
    assert pub == 1 and priv > pub, (pub, priv)
    runs, part, qrels = mirrored_setup()
    specs = [rr, MetricSpec("NDCG", 10)]
    rep = holdout_compare(runs, part, [qrels], specs, trials=200, seed=7)
    for spec in specs:
        a = rep.condition("public", "graded", spec).ordering
        b = rep.condition("private", "graded", spec).ordering
        assert a == b, (a, b)
    return f"overfit run public rank 1, private rank {priv}; mirrored partitions identical"


def test_criterion_7_holdout():
    report(7, "holdout divergence signature", criterion_7)


# 8 ------------------------------------------------------------------------

def criterion_8():
    rng = np.random.default_rng(8)
    value = ndcg([1, 0, 2], [2, 1, 0], 3)
    assert abs(value - 0.6885288809404666690) <= 1e-9, value
    for _ in range(100_000):
        n = int(rng.integers(1, 11))
        k = int(rng.integers(1, 11))
        grades = rng.integers(0, 4, n).tolist()
        extra = rng.integers(0, 4, int(rng.integers(0, 4))).tolist()
        pool = grades + extra
        rr = reciprocal_rank(grades, k, exact=True)
        assert rr == 0 or (rr.numerator == 1 and rr.denominator <= k), (grades, k, rr)
        nd = ndcg(grades, pool, k)
        assert 0 <= nd <= 1 and 0 <= ncg(grades, pool, k) <= 1
        binary = [int(g >= 1) for g in grades]
        assert 0 <= average_precision(binary, sum(1 for g in pool if g >= 1), k) <= 1
        best = sorted(pool, reverse=True)[:k]
        if best and best[0] > 0:
            # Compare zero-padded gain vectors: unfilled slots carry no gain.
            pad = lambda g: list(g[:k]) + [0] * (k - len(g[:k]))
            optimal = pad(grades) == pad(best)
            assert (abs(nd - 1) <= 1e-12) == optimal, (grades, pool, k, nd)
        i = int(rng.integers(0, n))
        if grades[i] < 3:
            up = list(grades)
            up[i] += 1
            ideal = [3] * (n + len(extra))
            assert ndcg(up, ideal, k) >= ndcg(grades, ideal, k)
            assert ncg(up, ideal, k) >= ncg(grades, ideal, k)
            assert reciprocal_rank(up, k) >= reciprocal_rank(grades, k)
    return f"100000 SERPs, NDCG example {value:.10f}"


def test_criterion_8_metric_properties():
    report(8, "metric properties", criterion_8)


# 9 ------------------------------------------------------------------------

def criterion_9():
    recs = []
    for group, count in (("inst-c", 7), ("inst-d", 2), ("inst-a", 12), ("inst-b", 11)):
        for i in range(count):
            day = dt.date(2019, 1, 1) + dt.timedelta(days=17 * i)
            recs.append({"group_id": group, "run_id": f"{group}-{i}", "submitted_on": day.isoformat()})
    counts = [s.count for s in group_stats(manifest_from(recs))]
    assert counts == [12, 11, 7, 2], counts

    jan = manifest_from([{"group_id": "g", "run_id": f"r{d}", "submitted_on": f"2020-01-{d:02d}"}
                         for d in (5, 20, 25)])
    violations = check_submission_policy(jan)
    assert len(violations) == 1 and violations[0].run_id == "r25", violations

    rnd = random.Random(9)
    for _ in range(1000):
        n = rnd.randint(1, 30)
        recs = [{"group_id": f"g{rnd.randint(0, 4)}", "run_id": f"r{i}", "baseline": rnd.random() < 0.1,
                 "submitted_on": (dt.date(2018, 1, 1) + dt.timedelta(days=rnd.randint(0, 900))).isoformat()}
                for i in range(n)]
        m = manifest_from(recs)
        scores = {r["run_id"]: rnd.randint(0, 20) / 20 for r in recs}
        pts = sota_trajectory(m, scores)
        assert all(a.score < b.score for a, b in zip(pts, pts[1:]))
        assert all(a.date <= b.date for a, b in zip(pts, pts[1:]))
        best = baseline_score_from(m, scores)
        on_path = {p.run_id for p in pts}
        for s in sorted(m.submissions, key=lambda s: (s.submitted_on, s.run_id)):
            assert (s.run_id in on_path) == (scores[s.run_id] > best)
            best = max(best, scores[s.run_id])
    return "ordering (12, 11, 7, 2), one January violation, 1000 trajectories consistent"


def test_criterion_9_monitor():
    report(9, "submission monitor", criterion_9)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
