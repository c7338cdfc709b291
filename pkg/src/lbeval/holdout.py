"""Public versus private (held-out) leaderboard comparison."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bootstrap import DEFAULT_TRIALS, RankDistribution, bootstrap_ranks, rank_order
from .corpus import QueryPartition, Qrels, Run, validate_run_against_queryset
from .errors import IntegrityError
from .metrics import MetricMatrix, MetricSpec, score_matrix

QUERYSETS = ("public", "private")


@dataclass(frozen=True, eq=False)
class HoldoutCondition:
    queryset: str
    scheme_id: str
    metric: MetricSpec
    matrix: MetricMatrix
    aggregates: np.ndarray
    ranks: np.ndarray  # leaderboard rank per run, in run order
    distribution: RankDistribution

    @property
    def label(self) -> str:
        return f"{self.queryset}/{self.scheme_id}/{self.metric}"

    @property
    def ordering(self) -> tuple[str, ...]:
        order = np.argsort(self.ranks, kind="stable")
        return tuple(self.matrix.run_ids[i] for i in order)

    def rank_of(self, run_id: str) -> int:
        return int(self.ranks[self.matrix.run_ids.index(run_id)])


@dataclass(frozen=True)
class PrunedCondition:
    queryset: str
    scheme_id: str
    metric: MetricSpec
    reason: str


@dataclass(frozen=True, eq=False)
class HoldoutReport:
    run_ids: tuple[str, ...]
    conditions: tuple[HoldoutCondition, ...]
    pruned: tuple[PrunedCondition, ...] = ()
    focus_runs: tuple[str, ...] = ()
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    aggregation: str = "mean"

    def condition(self, queryset: str, scheme_id: str, metric: MetricSpec) -> HoldoutCondition:
        for c in self.conditions:
            if (c.queryset, c.scheme_id, c.metric) == (queryset, scheme_id, metric):
                return c
        raise KeyError((queryset, scheme_id, str(metric)))

    def focus_rows(self) -> list[dict]:
        """Boxplot data: per condition and focus run, rank quantiles and expected rank."""
        rows = []
        for c in self.conditions:
            quant = c.distribution.rank_quantiles
            exp = c.distribution.expected_rank
            for run_id in self.focus_runs:
                i = c.matrix.run_ids.index(run_id)
                rows.append({
                    "condition": c.label, "run_id": run_id,
                    "leaderboard_rank": int(c.ranks[i]), "expected_rank": float(exp[i]),
                    "min": float(quant[i, 0]), "q1": float(quant[i, 1]),
                    "median": float(quant[i, 2]), "q3": float(quant[i, 3]),
                    "max": float(quant[i, 4]),
                })
        return rows


def _ordered(ids) -> tuple[str, ...]:
    return tuple(sorted(ids))


def holdout_compare(runs: Sequence[Run], partition: QueryPartition, schemes: Sequence[Qrels],
                    metrics: Sequence[MetricSpec], trials: int = DEFAULT_TRIALS, seed: int = 0,
                    focus_runs: Sequence[str] = (), aggregation: str = "mean") -> HoldoutReport:
    """Evaluate every (queryset, scheme, metric) condition that has labels.

    A condition is kept only when the scheme judges every query of its query
    set; the rest are listed in ``pruned`` with a reason.
    """
    if not schemes:
        raise ValueError("at least one labeled scheme is required")
    if not metrics:
        raise ValueError("at least one metric is required")
    for run in runs:
        missing = validate_run_against_queryset(run, partition.private_ids).missing
        if missing:
            raise IntegrityError(
                f"run {run.run_id!r} is missing {len(missing)} private queries, "
                f"e.g. {sorted(missing)[:5]}"
            )
    run_ids = tuple(r.run_id for r in runs)
    unknown = [f for f in focus_runs if f not in run_ids]
    if unknown:
        raise ValueError(f"unknown focus runs: {unknown}")

    querysets = {"public": _ordered(partition.public_ids), "private": _ordered(partition.private_ids)}
    conditions, pruned = [], []
    for qs in QUERYSETS:
        qids = querysets[qs]
        for qrels in schemes:
            for spec in metrics:
                if not qids:
                    pruned.append(PrunedCondition(qs, qrels.scheme_id, spec, f"{qs} query set is empty"))
                    continue
                unlabeled = [q for q in qids if q not in qrels.grades]
                if unlabeled:
                    pruned.append(PrunedCondition(
                        qs, qrels.scheme_id, spec,
                        f"scheme {qrels.scheme_id!r} has no labels for {len(unlabeled)} of {len(qids)} {qs} queries",
                    ))
                    continue
                matrix = score_matrix(runs, qrels, spec, qids)
                agg = matrix.aggregate(aggregation)
                conditions.append(HoldoutCondition(
                    qs, qrels.scheme_id, spec, matrix, agg, rank_order(agg),
                    bootstrap_ranks(matrix, trials, seed, aggregation),
                ))
    return HoldoutReport(run_ids, tuple(conditions), tuple(pruned), tuple(focus_runs),
                         trials, seed, aggregation)
