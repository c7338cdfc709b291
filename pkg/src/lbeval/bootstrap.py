"""Bootstrap rank-stability analysis over a MetricMatrix.

Each trial resamples the query columns with replacement (same size as the
original set), aggregates each run, and ranks runs descending; ties go to the
run listed first. Trial ``t`` draws from PCG64 seeded with
``SeedSequence([seed, t])``, so results do not depend on how trials are
scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import MetricMatrix

DEFAULT_TRIALS = 1000


@dataclass(frozen=True, eq=False)
class RankDistribution:
    run_ids: tuple[str, ...]
    trials: int
    counts: np.ndarray  # run x rank, integer trial counts
    seed: int
    aggregation: str = "mean"
    # Rank of each run on the full (non-resampled) query set.
    leaderboard_rank: tuple[int, ...] = ()

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def expected_rank(self) -> np.ndarray:
        ranks = np.arange(1, len(self.run_ids) + 1)
        return (self.counts @ ranks) / self.trials

    @property
    def rank_quantiles(self) -> np.ndarray:
        """Per-run (min, q1, median, q3, max) of the rank across trials."""
        ranks = np.arange(1, len(self.run_ids) + 1)
        out = np.empty((len(self.run_ids), 5))
        for i, row in enumerate(self.counts):
            sample = np.repeat(ranks, row)
            out[i] = np.quantile(sample, [0, 0.25, 0.5, 0.75, 1.0])
        return out

    def __eq__(self, other):
        if not isinstance(other, RankDistribution):
            return NotImplemented
        return (self.run_ids == other.run_ids and self.trials == other.trials
                and self.seed == other.seed and self.aggregation == other.aggregation
                and self.leaderboard_rank == other.leaderboard_rank
                and np.array_equal(self.counts, other.counts))


@dataclass(frozen=True)
class RankSummaryRow:
    run_id: str
    leaderboard_rank: int
    expected_rank: float
    min: float
    q1: float
    median: float
    q3: float
    max: float


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial])))


def rank_order(aggregates: np.ndarray) -> np.ndarray:
    """1-based ranks, descending by aggregate, ties to the earlier run."""
    order = np.argsort(-aggregates, kind="stable")
    ranks = np.empty(len(aggregates), dtype=np.int64)
    ranks[order] = np.arange(1, len(aggregates) + 1)
    return ranks


def leaderboard_ranks(matrix: MetricMatrix, aggregation: str = "mean") -> np.ndarray:
    return rank_order(matrix.aggregate(aggregation))


def bootstrap_ranks(matrix: MetricMatrix, trials: int = DEFAULT_TRIALS, seed: int = 0,
                    aggregation: str = "mean") -> RankDistribution:
    n_runs, n_queries = matrix.shape
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if n_runs == 0 or n_queries == 0:
        raise ValueError("bootstrap needs a non-empty score matrix")
    if aggregation not in ("mean", "median"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    scores = matrix.scores
    counts = np.zeros((n_runs, n_runs), dtype=np.int64)
    runs = np.arange(n_runs)
    for t in range(trials):
        idx = trial_generator(seed, t).integers(0, n_queries, size=n_queries)
        if aggregation == "mean":
            weights = np.bincount(idx, minlength=n_queries)
            # Row-wise reduction keeps identical rows bitwise identical.
            agg = (scores * weights).sum(axis=1)
        else:
            agg = np.median(scores[:, idx], axis=1)
        counts[runs, rank_order(agg) - 1] += 1
    counts.setflags(write=False)
    lb = tuple(int(r) for r in leaderboard_ranks(matrix, aggregation))
    return RankDistribution(matrix.run_ids, trials, counts, seed, aggregation, lb)


def rank_summary(dist: RankDistribution, leaderboard_rank=None) -> list[RankSummaryRow]:
    """Expected rank and five-number summary per run, in leaderboard order.

    ``leaderboard_rank`` overrides the full-query-set ranks stored on the
    distribution; with neither, input order is the leaderboard order.
    """
    n = len(dist.run_ids)
    if leaderboard_rank is None:
        leaderboard_rank = dist.leaderboard_rank or range(1, n + 1)
    lb = np.asarray(leaderboard_rank)
    exp = dist.expected_rank
    quant = dist.rank_quantiles
    rows = [
        RankSummaryRow(dist.run_ids[i], int(lb[i]), float(exp[i]), *map(float, quant[i]))
        for i in range(n)
    ]
    return sorted(rows, key=lambda r: r.leaderboard_rank)
