import datetime as dt
import json
import sys

import numpy as np
import pytest

from lbeval.corpus import LeaderboardManifest, QueryPartition, Submission, make_qrels, make_run
from lbeval.metrics import MetricMatrix, MetricSpec


def matrix_from(scores, run_ids=None, metric="RR"):
    scores = np.asarray(scores, dtype=float)
    runs = run_ids or tuple(f"r{i}" for i in range(scores.shape[0]))
    qids = tuple(f"q{j}" for j in range(scores.shape[1]))
    return MetricMatrix(MetricSpec(metric, 10), tuple(runs), qids, scores)


def manifest_from(records, task="docs"):
    subs = []
    for i, rec in enumerate(records):
        rec = dict(rec)
        rec.setdefault("run_id", f"run{i:03d}")
        rec.setdefault("description", "")
        rec.setdefault("path", f"{rec['run_id']}.run")
        if isinstance(rec["submitted_on"], str):
            rec["submitted_on"] = dt.date.fromisoformat(rec["submitted_on"])
        subs.append(Submission(**rec))
    return LeaderboardManifest(task, tuple(subs))


def overfit_setup(n_public=20, n_private=20, n_honest=4, seed=0):
    """One relevant doc per query; the overfit run knows the public answers only."""
    rng = np.random.default_rng(seed)
    pub = [f"p{i:02d}" for i in range(n_public)]
    priv = [f"h{i:02d}" for i in range(n_private)]
    queries = pub + priv
    qrels = make_qrels("sparse", {q: {f"{q}-rel": 1} for q in queries})
    docs = lambda q: [f"{q}-rel"] + [f"{q}-d{j}" for j in range(9)]

    def ranked(q, pos):
        rest = [d for d in docs(q) if not d.endswith("-rel")]
        order = rest[:pos] + [f"{q}-rel"] + rest[pos:]
        return [(d, float(10 - i)) for i, d in enumerate(order)]

    runs = [make_run("overfit", {q: ranked(q, 0) if q in pub else ranked(q, int(rng.integers(0, 10)))
                                 for q in queries})]
    for k in range(n_honest):
        runs.append(make_run(f"honest{k}", {q: ranked(q, int(rng.integers(0, 2))) for q in queries}))
    part = QueryPartition(frozenset(pub), frozenset(priv))
    return runs, part, qrels


def mirrored_setup(n=12, n_runs=5, seed=3):
    """Private queries are relabelled copies of the public ones, judgments and results alike."""
    rng = np.random.default_rng(seed)
    grades = {}
    results = {f"r{k}": {} for k in range(n_runs)}
    for i in range(n):
        g = {f"d{j}": int(rng.integers(0, 3)) for j in range(6)}
        for prefix in ("a", "b"):
            grades[f"{prefix}{i}"] = {f"{prefix}{i}{d}": v for d, v in g.items()}
        for k in range(n_runs):
            order = rng.permutation(6)
            for prefix in ("a", "b"):
                results[f"r{k}"][f"{prefix}{i}"] = [(f"{prefix}{i}d{j}", float(6 - r)) for r, j in enumerate(order)]
    runs = [make_run(r, res) for r, res in results.items()]
    part = QueryPartition(frozenset(f"a{i}" for i in range(n)), frozenset(f"b{i}" for i in range(n)))
    return runs, part, make_qrels("graded", grades)


@pytest.fixture
def leaderboard_dir(tmp_path):
    """Two runs on disk plus manifest, partition and qrels files."""
    runs = {
        "alpha": "q1 Q0 d1 1 3.0 alpha\nq1 Q0 d2 2 2.0 alpha\nq2 Q0 d3 1 1.0 alpha\n",
        "beta": "q1 Q0 d2 1 3.0 beta\nq1 Q0 d1 2 2.0 beta\nq2 Q0 d4 1 1.0 beta\n",
    }
    for name, text in runs.items():
        (tmp_path / f"{name}.run").write_text(text)
    manifest = {
        "task_id": "docs",
        "submissions": [
            {"run_id": "alpha", "group_id": "g1", "submitted_on": "2020-01-05",
             "description": "first", "path": "alpha.run", "baseline": True},
            {"run_id": "beta", "group_id": "g2", "submitted_on": "2020-02-01",
             "description": "second", "path": "beta.run"},
        ],
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    (tmp_path / "partition.json").write_text(json.dumps({"public": ["q1"], "private": ["q2"]}))
    (tmp_path / "qrels.txt").write_text("q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 1\n")
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    accept = sys.modules.get("test_acceptance")
    if accept is None or not accept.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(accept.RESULTS):
        terminalreporter.write_line(accept.RESULTS[number])
