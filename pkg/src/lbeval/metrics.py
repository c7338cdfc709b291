"""Per-query IR metrics and run x query score matrices.

Metric functions take the ordered grade tuple of a result page. RR and AP
expect binarized grades; NDCG and NCG take raw grades plus the query's full
grade population as the ideal.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .corpus import Qrels, Run, make_qrels

KINDS = ("RR", "NDCG", "AP", "NCG")
_ALIASES = {"rr": "RR", "mrr": "RR", "ndcg": "NDCG", "ap": "AP", "map": "AP", "ncg": "NCG"}
_SPEC_RE = re.compile(r"^(?P<kind>[a-z]+)(?:@(?P<k>\d+))?(?P<opts>(?::[a-z]+=[a-z0-9]+)*)$")


@dataclass(frozen=True)
class MetricSpec:
    kind: str
    cutoff: int | None = None
    # None defers to the scheme default; see resolve_threshold.
    binarization_threshold: int | None = None
    gain: str = "exp"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.cutoff is not None and self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.binarization_threshold is not None and self.binarization_threshold < 1:
            raise ValueError("binarization threshold must be >= 1")
        if self.gain not in ("exp", "linear"):
            raise ValueError(f"unknown gain {self.gain!r}")

    @property
    def binary(self) -> bool:
        return self.kind in ("RR", "AP")

    def __str__(self):
        name = {"RR": "rr", "NDCG": "ndcg", "AP": "map", "NCG": "ncg"}[self.kind]
        out = name if self.cutoff is None else f"{name}@{self.cutoff}"
        if self.binarization_threshold is not None:
            out += f":bin={self.binarization_threshold}"
        if self.gain != "exp":
            out += f":gain={self.gain}"
        return out


def parse_metric_spec(text: str) -> MetricSpec:
    """Parse compact forms such as ``rr@10``, ``ndcg@10``, ``map``, ``ncg@100:bin=2``."""
    m = _SPEC_RE.match(text.strip().lower())
    if not m or m.group("kind") not in _ALIASES:
        raise ValueError(f"cannot parse metric spec {text!r}")
    kwargs = {}
    for opt in filter(None, m.group("opts").split(":")):
        key, val = opt.split("=")
        if key == "bin":
            kwargs["binarization_threshold"] = int(val)
        elif key == "gain":
            kwargs["gain"] = {"exp": "exp", "lin": "linear", "linear": "linear"}.get(val, val)
        else:
            raise ValueError(f"unknown metric option {key!r} in {text!r}")
    k = m.group("k")
    return MetricSpec(_ALIASES[m.group("kind")], int(k) if k else None, **kwargs)


def default_threshold(max_grade: int) -> int:
    return 1 if max_grade <= 1 else 2


def resolve_threshold(spec: MetricSpec, qrels: Qrels) -> int:
    t = spec.binarization_threshold
    if t is None:
        t = default_threshold(qrels.max_grade)
    if qrels.max_grade >= 1 and not 1 <= t <= qrels.max_grade:
        raise ValueError(
            f"binarization threshold {t} outside [1, {qrels.max_grade}] for scheme {qrels.scheme_id!r}"
        )
    return t


def binarize(qrels: Qrels, threshold: int) -> Qrels:
    if not 1 <= threshold <= qrels.max_grade:
        raise ValueError(f"threshold {threshold} outside [1, {qrels.max_grade}]")
    grades = {
        q: {d: int(g >= threshold) for d, g in docs.items()}
        for q, docs in qrels.grades.items()
    }
    out = make_qrels(qrels.scheme_id, grades)
    return replace(out, max_grade=1)


def gain_of(grade: int, gain: str = "exp", exact: bool = False):
    if gain == "linear":
        return Fraction(grade) if exact else float(grade)
    return Fraction(2**grade - 1) if exact else float(2**grade - 1)


def _top(grades: Sequence[int], k: int | None) -> Sequence[int]:
    return grades if k is None else grades[:k]


def reciprocal_rank(grades: Sequence[int], k: int | None = None, exact: bool = False):
    for i, g in enumerate(_top(grades, k), start=1):
        if g >= 1:
            return Fraction(1, i) if exact else 1.0 / i
    return Fraction(0) if exact else 0.0


def dcg(grades: Sequence[int], k: int | None = None, gain: str = "exp") -> float:
    return math.fsum(
        gain_of(g, gain) / math.log2(i + 1)
        for i, g in enumerate(_top(grades, k), start=1)
        if g > 0
    )


def ndcg(grades: Sequence[int], ideal: Iterable[int], k: int | None = None,
         gain: str = "exp") -> float:
    ideal_order = sorted(ideal, reverse=True)
    idcg = dcg(ideal_order, k, gain)
    if idcg == 0:
        return 0.0
    return dcg(grades, k, gain) / idcg


def average_precision(grades: Sequence[int], total_relevant: int, k: int | None = None,
                      exact: bool = False):
    top = _top(grades, k)
    hits = sum(1 for g in grades if g >= 1)
    if total_relevant < 0 or hits > total_relevant:
        raise ValueError(
            f"total_relevant={total_relevant} is below the {hits} relevant results ranked"
        )
    if total_relevant == 0:
        return Fraction(0) if exact else 0.0
    acc = Fraction(0)
    found = 0
    for i, g in enumerate(top, start=1):
        if g >= 1:
            found += 1
            acc += Fraction(found, i)
    ap = acc / total_relevant
    return ap if exact else float(ap)


def ncg(grades: Sequence[int], ideal: Iterable[int], k: int | None = None,
        gain: str = "exp", exact: bool = False):
    ideal_top = _top(sorted(ideal, reverse=True), k)
    denom = sum(gain_of(g, gain, exact) for g in ideal_top)
    if denom == 0:
        return Fraction(0) if exact else 0.0
    num = sum(gain_of(g, gain, exact) for g in _top(grades, k))
    return num / denom


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    metric: MetricSpec
    run_ids: tuple[str, ...]
    query_ids: tuple[str, ...]
    scores: np.ndarray
    # Resolved threshold for binary metrics on the scheme that produced the matrix.
    threshold: int | None = None
    scheme_id: str = ""

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.shape != (len(self.run_ids), len(self.query_ids)):
            raise ValueError(
                f"score table shape {scores.shape} does not match "
                f"{len(self.run_ids)} runs x {len(self.query_ids)} queries"
            )
        if scores.size and (np.nanmin(scores) < 0 or np.nanmax(scores) > 1 or np.isnan(scores).any()):
            raise ValueError("metric scores must lie in [0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    def __eq__(self, other):
        if not isinstance(other, MetricMatrix):
            return NotImplemented
        return (self.metric == other.metric and self.run_ids == other.run_ids
                and self.query_ids == other.query_ids
                and np.array_equal(self.scores, other.scores))

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def aggregate(self, how: str = "mean") -> np.ndarray:
        return aggregate(self.scores, how)

    def restrict(self, query_ids: Iterable[str]) -> MetricMatrix:
        pos = {q: i for i, q in enumerate(self.query_ids)}
        ids = tuple(query_ids)
        cols = [pos[q] for q in ids]
        return replace(self, query_ids=ids, scores=self.scores[:, cols])

    def select_runs(self, run_ids: Iterable[str]) -> MetricMatrix:
        pos = {r: i for i, r in enumerate(self.run_ids)}
        ids = tuple(run_ids)
        return replace(self, run_ids=ids, scores=self.scores[[pos[r] for r in ids], :])


def aggregate(scores: np.ndarray, how: str = "mean") -> np.ndarray:
    """Row-wise aggregate of a score table (one value per run)."""
    if how == "mean":
        return scores.mean(axis=-1)
    if how == "median":
        return np.median(scores, axis=-1)
    raise ValueError(f"unknown aggregation {how!r}")


def query_score(spec: MetricSpec, ranking: Sequence[tuple[str, float]], judged, threshold: int) -> float:
    """Score one ranked list against one query's judgments (unjudged docs count as 0)."""
    depth = spec.cutoff
    docs = ranking if depth is None else ranking[:depth]
    grades = [judged.get(d, 0) for d, _ in docs]
    if spec.binary:
        binary = [int(g >= threshold) for g in grades]
        if spec.kind == "RR":
            return reciprocal_rank(binary, depth)
        total = sum(1 for g in judged.values() if g >= threshold)
        return average_precision(binary, total, depth)
    if spec.kind == "NDCG":
        return ndcg(grades, judged.values(), depth, spec.gain)
    return ncg(grades, judged.values(), depth, spec.gain)


def score_matrix(runs: Sequence[Run], qrels: Qrels, spec: MetricSpec,
                 query_ids: Iterable[str]) -> MetricMatrix:
    """Evaluate every run on every listed query.

    Set-like ``query_ids`` are sorted; sequences keep their order. A run that
    did not return a query scores 0 there.
    """
    if isinstance(query_ids, (set, frozenset)):
        qids = tuple(sorted(query_ids))
    else:
        qids = tuple(query_ids)
    absent = [q for q in qids if q not in qrels.grades]
    if absent:
        raise ValueError(f"queries without judgments in scheme {qrels.scheme_id!r}: {absent}")
    threshold = resolve_threshold(spec, qrels) if spec.binary else None
    scores = np.zeros((len(runs), len(qids)))
    for i, run in enumerate(runs):
        for j, q in enumerate(qids):
            ranking = run.results.get(q)
            if ranking:
                scores[i, j] = query_score(spec, ranking, qrels.grades[q], threshold)
    return MetricMatrix(
        metric=spec,
        run_ids=tuple(r.run_id for r in runs),
        query_ids=qids,
        scores=scores,
        threshold=threshold,
        scheme_id=qrels.scheme_id,
    )
