"""Split-half reliability of pairwise significance verdicts.

The query set is bisected at random many times. For every unordered run pair
and split, each half yields a verdict (direction + significance) and the two
verdicts are classified as agreeing, partially agreeing, or disagreeing.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .metrics import MetricMatrix
from .stats import DEFAULT_ALPHA, METHODS, PairVerdict, aggregate_delta, direction, p_value_or_one

DEFAULT_SPLITS = 100

# Column layout of the agreement table: the four tests under mean aggregation,
# then the three tests that are also reported with median aggregation.
DEFAULT_COLUMNS = (
    ("sign", "mean"), ("wx-rs", "mean"), ("wx-sr", "mean"), ("t", "mean"),
    ("sign", "median"), ("wx-rs", "median"), ("wx-sr", "median"),
)


class Agreement(enum.Enum):
    AGREE = "agree"
    PARTIAL = "partial"
    DISAGREE = "disagree"


@dataclass(frozen=True)
class AgreementReport:
    test: str
    aggregation: str
    splits: int
    agree_rate: float
    partial_rate: float
    disagree_rate: float
    perc_signif: float
    alpha: float
    units: int = 0
    degenerate: int = 0  # half-split test evaluations scored as p = 1

    @property
    def method(self) -> str:
        return METHODS[self.test]


def split_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _half_positions(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    cut = (n + 1) // 2
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def random_half_split(query_ids: Sequence[str], seed: int, index: int = 0
                      ) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Disjoint halves of sizes ceil(n/2) and floor(n/2), in input order."""
    qids = list(query_ids)
    if len(qids) < 2:
        raise ValueError("need at least 2 queries to split")
    first, second = _half_positions(len(qids), split_generator(seed, index))
    return tuple(qids[i] for i in first), tuple(qids[i] for i in second)


def classify_agreement(v1: PairVerdict, v2: PairVerdict) -> Agreement:
    """Compare two half-split verdicts on the same pair, test and aggregation.

    A direction tie counts as agreeing in direction with either side.
    """
    same_direction = v1.better == v2.better or "tie" in (v1.better, v2.better)
    if v1.significant == v2.significant:
        if same_direction or not v1.significant:
            # Opposite directions, neither significant: partial agreement.
            return Agreement.AGREE if same_direction else Agreement.PARTIAL
        return Agreement.DISAGREE
    return Agreement.PARTIAL if same_direction else Agreement.DISAGREE


def agreement_table(matrix: MetricMatrix, columns: Iterable[tuple[str, str]] = DEFAULT_COLUMNS,
                    splits: int = DEFAULT_SPLITS, seed: int = 0,
                    alpha: float = DEFAULT_ALPHA) -> list[AgreementReport]:
    """One AgreementReport per (test, aggregation) column, all over the same splits."""
    columns = list(columns)
    n_runs, n_queries = matrix.shape
    if n_runs < 2 or n_queries < 2:
        raise ValueError("agreement analysis needs at least 2 runs and 2 queries")
    if splits < 1:
        raise ValueError("splits must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    for test, agg in columns:
        if test not in METHODS or agg not in ("mean", "median"):
            raise ValueError(f"unknown column ({test!r}, {agg!r})")
    tests = sorted({t for t, _ in columns})
    aggs = sorted({a for _, a in columns})

    tallies = {col: dict.fromkeys(Agreement, 0) for col in columns}
    signif = dict.fromkeys(columns, 0)
    degenerate = dict.fromkeys(columns, 0)
    scores = matrix.scores
    pairs = list(itertools.combinations(range(n_runs), 2))

    for s in range(splits):
        halves = _half_positions(n_queries, split_generator(seed, s))
        for i, j in pairs:
            verdicts = []
            for half in halves:
                a = scores[i, half].tolist()
                b = scores[j, half].tolist()
                pvals = {t: p_value_or_one(t, a, b) for t in tests}
                deltas = {g: aggregate_delta(a, b, g) for g in aggs}
                verdicts.append({
                    (t, g): PairVerdict(direction(deltas[g]), pvals[t][0] < alpha,
                                        pvals[t][0], g, deltas[g], t, pvals[t][1])
                    for t, g in columns
                })
            for col in columns:
                v1, v2 = verdicts[0][col], verdicts[1][col]
                tallies[col][classify_agreement(v1, v2)] += 1
                signif[col] += v1.significant or v2.significant
                degenerate[col] += v1.degenerate + v2.degenerate

    units = splits * len(pairs)
    return [
        AgreementReport(
            test=t, aggregation=g, splits=splits,
            agree_rate=tallies[(t, g)][Agreement.AGREE] / units,
            partial_rate=tallies[(t, g)][Agreement.PARTIAL] / units,
            disagree_rate=tallies[(t, g)][Agreement.DISAGREE] / units,
            perc_signif=signif[(t, g)] / units,
            alpha=alpha, units=units, degenerate=degenerate[(t, g)],
        )
        for t, g in columns
    ]


def agreement_analysis(matrix: MetricMatrix, test: str = "sign", aggregation: str = "mean",
                       splits: int = DEFAULT_SPLITS, seed: int = 0,
                       alpha: float = DEFAULT_ALPHA) -> AgreementReport:
    return agreement_table(matrix, [(test, aggregation)], splits, seed, alpha)[0]
