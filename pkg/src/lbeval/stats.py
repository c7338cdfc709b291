"""Paired significance tests over per-query score vectors.

Exact null distributions are counted with integer dynamic programming and
p-values are formed from exact integer ratios, so exact-mode results are
reproducible to the last bit. All tests are two-sided:
``p = min(1, 2 * min(P(T <= t), P(T >= t)))``.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from .errors import DegenerateInputError

SIGNED_RANK_EXACT_LIMIT = 25
RANK_SUM_EXACT_LIMIT = 16
DEFAULT_ALPHA = 0.05

METHODS = {
    "sign": "SignTest",
    "wx-rs": "WilcoxonRankSum",
    "wx-sr": "WilcoxonSignedRank",
    "t": "PairedT",
}


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float
    exact: bool
    n_effective: int

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class PairVerdict:
    better: str  # "A", "B" or "tie"
    significant: bool
    p_value: float
    aggregation: str
    delta: float
    test: str = "sign"
    degenerate: bool = False


def _two_sided(lower: int, upper: int, total: int) -> float:
    return float(min(Fraction(1), 2 * Fraction(min(lower, upper), total)))


def _normal_two_sided(stat: float, mean: float, var: float) -> float:
    if var <= 0:
        return 1.0
    z = max(abs(stat - mean) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def _nonzero(diffs) -> np.ndarray:
    d = np.asarray(diffs, dtype=np.float64).ravel()
    return d[d != 0]


def sign_test(diffs: Sequence[float]) -> TestResult:
    d = _nonzero(diffs)
    n = d.size
    if n == 0:
        raise DegenerateInputError("sign test: all differences are zero")
    k = int((d > 0).sum())
    lower = sum(math.comb(n, i) for i in range(0, k + 1))
    upper = sum(math.comb(n, i) for i in range(k, n + 1))
    return TestResult("SignTest", float(k), _two_sided(lower, upper, 2**n), True, n)


@lru_cache(maxsize=4096)
def _signed_rank_counts(doubled_ranks: tuple[int, ...]) -> tuple[int, ...]:
    """Number of sign assignments giving each doubled positive-rank sum."""
    counts = [1]
    for r in doubled_ranks:
        nxt = counts + [0] * r
        for s, c in enumerate(counts):
            if c:
                nxt[s + r] += c
        counts = nxt
    return tuple(counts)


def wilcoxon_signed_rank(diffs: Sequence[float],
                         exact_limit: int = SIGNED_RANK_EXACT_LIMIT) -> TestResult:
    d = _nonzero(diffs)
    n = d.size
    if n == 0:
        raise DegenerateInputError("signed-rank test: all differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_limit:
        doubled = tuple(sorted(int(round(2 * r)) for r in ranks))
        counts = _signed_rank_counts(doubled)
        s = int(round(2 * w_plus))
        lower = sum(counts[: s + 1])
        upper = sum(counts[s:])
        return TestResult("WilcoxonSignedRank", w_plus, _two_sided(lower, upper, 2**n), True, n)
    _, ties = np.unique(np.abs(d), return_counts=True)
    mean = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24 - float((ties**3 - ties).sum()) / 48
    return TestResult("WilcoxonSignedRank", w_plus, _normal_two_sided(w_plus, mean, var), False, n)


@lru_cache(maxsize=512)
def _rank_sum_counts(n: int, total: int) -> tuple[int, ...]:
    """Number of size-n subsets of {1..total} with each possible rank sum."""
    max_sum = sum(range(total - n + 1, total + 1))
    # dp[k][s]: subsets of size k with sum s
    dp = [[0] * (max_sum + 1) for _ in range(n + 1)]
    dp[0][0] = 1
    for r in range(1, total + 1):
        for k in range(min(r, n), 0, -1):
            row, prev = dp[k], dp[k - 1]
            for s in range(max_sum, r - 1, -1):
                if prev[s - r]:
                    row[s] += prev[s - r]
    return tuple(dp[n])


def wilcoxon_rank_sum(xs: Sequence[float], ys: Sequence[float],
                      exact_limit: int = RANK_SUM_EXACT_LIMIT) -> TestResult:
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    n, m = x.size, y.size
    if n == 0 or m == 0:
        raise ValueError("rank-sum test needs two non-empty samples")
    pooled = np.concatenate([x, y])
    ranks = rankdata(pooled)
    w = float(ranks[:n].sum())
    total = n + m
    _, ties = np.unique(pooled, return_counts=True)
    tie_free = bool((ties == 1).all())
    if total <= exact_limit and tie_free:
        counts = _rank_sum_counts(n, total)
        s = int(round(w))
        lower = sum(counts[: s + 1])
        upper = sum(counts[s:])
        return TestResult("WilcoxonRankSum", w, _two_sided(lower, upper, math.comb(total, n)), True, total)
    mean = n * (total + 1) / 2
    tie_term = float((ties**3 - ties).sum()) / (total * (total - 1)) if total > 1 else 0.0
    var = n * m / 12 * ((total + 1) - tie_term)
    return TestResult("WilcoxonRankSum", w, _normal_two_sided(w, mean, var), False, total)


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided Student-t tail probability via the regularized incomplete beta."""
    return float(betainc(df / 2, 0.5, df / (df + t * t)))


def paired_t(diffs: Sequence[float]) -> TestResult:
    d = np.asarray(diffs, dtype=np.float64).ravel()
    n = d.size
    if n < 2:
        raise DegenerateInputError("paired t-test needs at least 2 differences")
    sd = float(d.std(ddof=1))
    # The second check catches variances that underflow to zero.
    if (d == d[0]).all() or sd == 0:
        raise DegenerateInputError("paired t-test: differences have zero variance")
    t = float(d.mean()) / (sd / math.sqrt(n))
    return TestResult("PairedT", t, t_sf_two_sided(t, n - 1), False, n)


def run_test(test: str, a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Run a named test (sign, wx-rs, wx-sr, t) on paired per-query scores a, b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if test == "wx-rs":
        return wilcoxon_rank_sum(a, b)
    diffs = a - b
    if test == "sign":
        return sign_test(diffs)
    if test == "wx-sr":
        return wilcoxon_signed_rank(diffs)
    if test == "t":
        return paired_t(diffs)
    raise ValueError(f"unknown test {test!r}; expected one of {sorted(METHODS)}")


def aggregate_delta(a, b, aggregation: str) -> float:
    if aggregation == "mean":
        return math.fsum(a) / len(a) - math.fsum(b) / len(b)
    if aggregation == "median":
        return statistics.median(a) - statistics.median(b)
    raise ValueError(f"unknown aggregation {aggregation!r}")


def direction(delta: float) -> str:
    return "A" if delta > 0 else "B" if delta < 0 else "tie"


def p_value_or_one(test: str, a, b) -> tuple[float, bool]:
    """p-value of a named test, with degenerate inputs mapped to (1.0, True)."""
    try:
        return run_test(test, a, b).p_value, False
    except DegenerateInputError:
        return 1.0, True

def compare_pair(scores_a: Sequence[float], scores_b: Sequence[float], test: str = "sign",
                 aggregation: str = "mean", alpha: float = DEFAULT_ALPHA) -> PairVerdict:
    """Direction by aggregate difference, significance by the chosen test."""
    if len(scores_a) != len(scores_b):
        raise ValueError(f"length mismatch: {len(scores_a)} vs {len(scores_b)}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    a = [float(v) for v in scores_a]
    b = [float(v) for v in scores_b]
    delta = aggregate_delta(a, b, aggregation)
    p, degenerate = p_value_or_one(test, a, b)
    return PairVerdict(direction(delta), p < alpha, p, aggregation, delta, test, degenerate)
