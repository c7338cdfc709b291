"""Run, qrels, manifest and query-partition ingestion.

Every file enters the toolkit through this module. Input bytes are decoded as
latin-1 so that ids stay opaque 8-bit strings and compare bytewise.
"""

from __future__ import annotations

import datetime as dt
import io
import json
import logging
import math
import os
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping

from .errors import IntegrityError, MissingFileError, ParseError

log = logging.getLogger(__name__)

DEFAULT_DEPTH = 1000
ENCODING = "latin-1"


@dataclass(frozen=True)
class Run:
    run_id: str
    results: Mapping[str, tuple[tuple[str, float], ...]]
    group_id: str = ""
    submitted_on: dt.date | None = None
    description: str = ""

    @property
    def query_ids(self) -> frozenset[str]:
        return frozenset(self.results)

    def ranking(self, query_id: str) -> tuple[tuple[str, float], ...]:
        return self.results.get(query_id, ())


@dataclass(frozen=True)
class Qrels:
    scheme_id: str
    grades: Mapping[str, Mapping[str, int]]
    max_grade: int

    @property
    def query_ids(self) -> frozenset[str]:
        return frozenset(self.grades)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.grades.get(query_id, {}).get(doc_id, 0)

    def judged(self, query_id: str) -> Mapping[str, int]:
        return self.grades.get(query_id, {})


@dataclass(frozen=True)
class Submission:
    run_id: str
    group_id: str
    submitted_on: dt.date
    description: str
    path: str
    baseline: bool = False
    # None means the submitter did not tag the run either way.
    minor_variant: bool | None = None


@dataclass(frozen=True)
class LeaderboardManifest:
    task_id: str
    submissions: tuple[Submission, ...]
    base_dir: str = "."

    def by_run_id(self) -> dict[str, Submission]:
        return {s.run_id: s for s in self.submissions}

    def run_path(self, sub: Submission) -> str:
        return os.path.join(self.base_dir, sub.path)


@dataclass(frozen=True)
class QueryPartition:
    public_ids: frozenset[str]
    private_ids: frozenset[str]

    def __post_init__(self):
        overlap = self.public_ids & self.private_ids
        if overlap:
            raise IntegrityError(
                f"query ids in both public and private sets: {sorted(overlap)}"
            )
        if not (self.public_ids | self.private_ids):
            raise IntegrityError("query partition is empty")

    @property
    def all_ids(self) -> frozenset[str]:
        return self.public_ids | self.private_ids


@dataclass(frozen=True)
class ValidationReport:
    covered: frozenset[str]
    missing: frozenset[str]
    extraneous: frozenset[str]

    @property
    def complete(self) -> bool:
        return not self.missing


def _lines(stream: IO | bytes | str | Iterable) -> Iterator[str]:
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode(ENCODING)
        yield raw


def _freeze(d: dict) -> MappingProxyType:
    return MappingProxyType(d)


def _parse_score(tok: str, line_no: int, source) -> float:
    try:
        score = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric score {tok!r}", line_no, source) from None
    if not math.isfinite(score):
        raise ParseError(f"non-finite score {tok!r}", line_no, source)
    return score


def parse_run(stream, depth: int = DEFAULT_DEPTH, source: str | None = None) -> Run:
    """Parse a 6-column TREC run.

    Per-query lists are re-sorted by (score desc, doc_id desc); the rank column
    must be an integer but does not influence order.
    """
    if depth < 1:
        raise ValueError("depth cap must be >= 1")
    per_query: dict[str, dict[str, float]] = {}
    claimed_rank: dict[tuple[str, str], int] = {}
    run_id = None
    for line_no, line in enumerate(_lines(stream), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise ParseError(
                f"expected 6 fields, found {len(fields)}", line_no, source
            )
        qid, q0, doc, rank_tok, score_tok, tag = fields
        if q0 != "Q0":
            raise ParseError(f"second field must be 'Q0', found {q0!r}", line_no, source)
        try:
            rank = int(rank_tok)
        except ValueError:
            raise ParseError(f"non-integer rank {rank_tok!r}", line_no, source) from None
        score = _parse_score(score_tok, line_no, source)
        if run_id is None:
            run_id = tag
        docs = per_query.setdefault(qid, {})
        if doc in docs:
            raise IntegrityError(
                f"{source or 'run'}:{line_no}: duplicate result for query {qid!r}, doc {doc!r}"
            )
        docs[doc] = score
        claimed_rank[(qid, doc)] = rank
    if run_id is None:
        raise ParseError("run file contains no result lines", None, source)

    results = {}
    mismatched = dropped = 0
    for qid, docs in per_query.items():
        ordered = sorted(docs.items(), key=lambda t: (t[1], t[0]), reverse=True)
        for pos, (doc, _) in enumerate(ordered, start=1):
            if claimed_rank[(qid, doc)] != pos:
                mismatched += 1
        if len(ordered) > depth:
            dropped += len(ordered) - depth
            ordered = ordered[:depth]
        results[qid] = tuple(ordered)
    if mismatched:
        log.warning(
            "%s: %d rank-column values disagree with score order; score order wins",
            source or run_id, mismatched,
        )
    if dropped:
        log.warning("%s: dropped %d results beyond depth %d", source or run_id, dropped, depth)
    return Run(run_id=run_id, results=_freeze(results))


def write_run(run: Run, stream: IO[bytes]) -> None:
    for qid, ranking in run.results.items():
        for pos, (doc, score) in enumerate(ranking, start=1):
            stream.write(f"{qid} Q0 {doc} {pos} {score!r} {run.run_id}\n".encode(ENCODING))


def parse_qrels(stream, scheme_id: str = "qrels", source: str | None = None) -> Qrels:
    grades: dict[str, dict[str, int]] = {}
    for line_no, line in enumerate(_lines(stream), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, found {len(fields)}", line_no, source)
        qid, _, doc, grade_tok = fields
        try:
            grade = int(grade_tok)
        except ValueError:
            raise ParseError(f"non-integer grade {grade_tok!r}", line_no, source) from None
        if grade < 0:
            raise ParseError(f"negative grade {grade}", line_no, source)
        docs = grades.setdefault(qid, {})
        if doc in docs and docs[doc] != grade:
            raise IntegrityError(
                f"{source or 'qrels'}:{line_no}: conflicting grades for query {qid!r}, "
                f"doc {doc!r}: {docs[doc]} vs {grade}"
            )
        docs[doc] = grade
    if not grades:
        raise ParseError("qrels file contains no judgments", None, source)
    return make_qrels(scheme_id, grades)


def make_qrels(scheme_id: str, grades: Mapping[str, Mapping[str, int]]) -> Qrels:
    frozen = {q: _freeze(dict(docs)) for q, docs in grades.items()}
    if not frozen:
        raise IntegrityError("qrels must contain at least one query")
    max_grade = max((g for docs in frozen.values() for g in docs.values()), default=0)
    if any(g < 0 for docs in frozen.values() for g in docs.values()):
        raise IntegrityError("grades must be >= 0")
    return Qrels(scheme_id=scheme_id, grades=_freeze(frozen), max_grade=max_grade)


def make_run(run_id: str, results: Mapping[str, Iterable[tuple[str, float]]], **meta) -> Run:
    """Build a Run from in-memory (doc, score) lists, applying the parse-time ordering."""
    out = {}
    for qid, pairs in results.items():
        pairs = list(pairs)
        docs = [d for d, _ in pairs]
        if len(set(docs)) != len(docs):
            raise IntegrityError(f"duplicate doc ids for query {qid!r}")
        out[qid] = tuple(sorted(((d, float(s)) for d, s in pairs),
                                key=lambda t: (t[1], t[0]), reverse=True))
    return Run(run_id=run_id, results=_freeze(out), **meta)


def write_qrels(qrels: Qrels, stream: IO[bytes]) -> None:
    for qid, docs in qrels.grades.items():
        for doc, grade in docs.items():
            stream.write(f"{qid} 0 {doc} {grade}\n".encode(ENCODING))


def _parse_date(value, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise ParseError(f"{where}: unparseable date {value!r}") from None


def _read_json(stream, what: str):
    text = "".join(_lines(stream))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: {exc.msg}", exc.lineno) from None


def load_leaderboard_config(
    manifest_stream, partition_stream, base_dir: str = "."
) -> tuple[LeaderboardManifest, QueryPartition]:
    """Load a JSON leaderboard manifest and its public/private partition.

    Run paths in the manifest are resolved against ``base_dir`` and must exist.
    """
    doc = _read_json(manifest_stream, "manifest")
    if not isinstance(doc, dict) or "task_id" not in doc:
        raise ParseError("manifest: expected an object with 'task_id' and 'submissions'")
    subs = []
    seen = set()
    for i, rec in enumerate(doc.get("submissions", [])):
        where = f"manifest submission #{i}"
        try:
            run_id = str(rec["run_id"])
            sub = Submission(
                run_id=run_id,
                group_id=str(rec["group_id"]),
                submitted_on=_parse_date(rec["submitted_on"], where),
                description=str(rec.get("description", "")),
                path=str(rec["path"]),
                baseline=bool(rec.get("baseline", False)),
                minor_variant=rec.get("minor_variant"),
            )
        except KeyError as exc:
            raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
        if run_id in seen:
            raise IntegrityError(f"duplicate run_id {run_id!r} in manifest")
        seen.add(run_id)
        if not os.path.isfile(os.path.join(base_dir, sub.path)):
            raise MissingFileError(f"{where}: run file not found: {sub.path}")
        subs.append(sub)
    manifest = LeaderboardManifest(str(doc["task_id"]), tuple(subs), base_dir)

    part = _read_json(partition_stream, "partition")
    if not isinstance(part, dict):
        raise ParseError("partition: expected an object with 'public' and 'private' lists")
    partition = QueryPartition(
        frozenset(map(str, part.get("public", []))),
        frozenset(map(str, part.get("private", []))),
    )
    return manifest, partition


def load_manifest_runs(manifest: LeaderboardManifest, depth: int = DEFAULT_DEPTH) -> list[Run]:
    """Parse every run referenced by the manifest, attaching submission metadata."""
    runs = []
    for sub in manifest.submissions:
        path = manifest.run_path(sub)
        with open(path, "rb") as fh:
            run = parse_run(fh, depth=depth, source=path)
        runs.append(replace(
            run, run_id=sub.run_id, group_id=sub.group_id,
            submitted_on=sub.submitted_on, description=sub.description,
        ))
    return runs


def validate_run_against_queryset(run: Run, query_ids: Iterable[str]) -> ValidationReport:
    expected = frozenset(query_ids)
    have = run.query_ids
    return ValidationReport(
        covered=have & expected, missing=expected - have, extraneous=have - expected
    )
