"""Report tables and their CSV / JSON serialization.

CSV is for people: percentages carry one decimal (as in published leaderboard
tables) and other decimals four. JSON is for machines and keeps full
precision. Both start with a provenance block so reruns can be diffed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import mpmath
import numpy as np

from . import __version__
from .agreement import AgreementReport
from .bootstrap import RankDistribution, rank_summary
from .holdout import HoldoutReport
from .metrics import MetricMatrix
from .monitor import GroupStats, SotaPoint, Violation
from .scale import ScaleCheckResult, render_value


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list[Any]]  # full-precision cell values
    # Per-column CSV formatter: "pct" (x100, 1 decimal), "dec" (4 decimals) or None.
    formats: dict[str, str] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)
    # Per-row formatter, overriding the column formatter (row index -> format).
    row_formats: dict[int, str] = field(default_factory=dict)

    def cell_format(self, row: int, col: str) -> str | None:
        return self.row_formats.get(row) or self.formats.get(col)


def pct(x: float) -> str:
    return f"{100 * x:.1f}"


def dec(x: float) -> str:
    return f"{x:.4f}"


def _csv_cell(value, fmt):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return render_value(value)
    if fmt == "pct":
        return pct(float(value))
    if fmt == "dec" and isinstance(value, (float, np.floating)):
        return dec(float(value))
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 6)
    return str(value)


def _json_value(value):
    if isinstance(value, Fraction):
        return {"fraction": str(value), "decimal": float(value)}
    if isinstance(value, mpmath.mpf):
        return {"decimal": float(value), "digits": mpmath.nstr(value, 30)}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(command: str, config: dict, inputs: Sequence[str] = ()) -> dict:
    return {
        "toolkit": f"lbeval {__version__}",
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": {p: f"sha256:{file_digest(p)}" for p in sorted(set(inputs))},
    }


def emit_report(report, fmt: str = "csv", prov: dict | None = None) -> bytes:
    """Serialize a report value (or a list of tables) to bytes."""
    tables = report if isinstance(report, list) and report and isinstance(report[0], Table) \
        else to_tables(report)
    if fmt == "csv":
        return _to_csv(tables, prov).encode("utf-8")
    if fmt == "json":
        return _to_json(tables, prov).encode("utf-8")
    raise ValueError(f"unknown output format {fmt!r}")


def _to_csv(tables: list[Table], prov: dict | None) -> str:
    buf = io.StringIO()
    if prov:
        for line in json.dumps(_json_value(prov), sort_keys=True, indent=1).splitlines():
            buf.write(f"# {line}\n")
    for i, t in enumerate(tables):
        if i:
            buf.write("\n")
        buf.write(f"# table: {t.name}\n")
        for k in sorted(t.meta):
            buf.write(f"# {k}: {_csv_cell(t.meta[k], None)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(t.header)
        for i, row in enumerate(t.rows):
            w.writerow([_csv_cell(v, t.cell_format(i, h)) for h, v in zip(t.header, row)])
    return buf.getvalue()


def _to_json(tables: list[Table], prov: dict | None) -> str:
    doc = {
        "provenance": _json_value(prov) if prov else None,
        "tables": [
            {"name": t.name, "meta": _json_value(t.meta),
             "rows": [dict(zip(t.header, _json_value(list(r)))) for r in t.rows]}
            for t in tables
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def to_tables(report) -> list[Table]:
    if isinstance(report, Table):
        return [report]
    if isinstance(report, MetricMatrix):
        return [matrix_table(report)]
    if isinstance(report, RankDistribution):
        return [rank_distribution_table(report)]
    if isinstance(report, AgreementReport):
        return [agreement_grid([report])]
    if isinstance(report, HoldoutReport):
        return holdout_tables(report)
    if isinstance(report, ScaleCheckResult):
        return [scale_table(report)]
    if isinstance(report, list):
        if not report:
            raise ValueError("cannot infer the table type of an empty list; build a Table")
        first = report[0]
        if isinstance(first, AgreementReport):
            return [agreement_grid(report)]
        if isinstance(first, SotaPoint):
            return [sota_table(report)]
        if isinstance(first, Violation):
            return [violations_table(report)]
        if isinstance(first, GroupStats):
            return [group_stats_table(report)]
    raise TypeError(f"no report layout for {type(report).__name__}")


def matrix_table(m: MetricMatrix) -> Table:
    header = ["query_id", *m.run_ids]
    rows = [[q, *m.scores[:, j].tolist()] for j, q in enumerate(m.query_ids)]
    rows.append(["all", *m.aggregate("mean").tolist()])
    meta = {"metric": str(m.metric), "scheme": m.scheme_id, "aggregate_row": "mean over queries"}
    if m.threshold is not None:
        meta["binarization_threshold"] = m.threshold
    return Table(f"scores {m.metric}", header, rows, dict.fromkeys(m.run_ids, "dec"), meta)


def rank_distribution_table(dist: RankDistribution) -> Table:
    n = len(dist.run_ids)
    rank_cols = [f"rank_{r}_pct" for r in range(1, n + 1)]
    header = ["run_id", "leaderboard_rank", "expected_rank", "min", "q1", "median", "q3", "max",
              *rank_cols]
    props = dist.proportions
    pos = {r: i for i, r in enumerate(dist.run_ids)}
    rows = []
    for s in rank_summary(dist):
        rows.append([s.run_id, s.leaderboard_rank, s.expected_rank, s.min, s.q1, s.median,
                     s.q3, s.max, *props[pos[s.run_id]].tolist()])
    formats = {"expected_rank": "dec", **dict.fromkeys(rank_cols, "pct")}
    meta = {"trials": dist.trials, "seed": dist.seed, "aggregation": dist.aggregation,
            "resampling": "queries with replacement, same size as the query set",
            "tie_break": "earlier run in leaderboard order ranks higher",
            "generator": "PCG64 seeded by SeedSequence([seed, trial])"}
    return Table("bootstrap rank distribution", header, rows, formats, meta)


AGREEMENT_ROWS = (
    ("agree", "agree_rate"),
    ("part. agree", "partial_rate"),
    ("disagree", "disagree_rate"),
    ("perc. signif.", "perc_signif"),
)


def agreement_grid(reports: list[AgreementReport]) -> Table:
    cols = [f"{r.test}/{r.aggregation}" for r in reports]
    rows = [[label, *(getattr(r, attr) for r in reports)] for label, attr in AGREEMENT_ROWS]
    rows.append(["units", *(r.units for r in reports)])
    rows.append(["degenerate half-tests", *(r.degenerate for r in reports)])
    first = reports[0]
    meta = {"splits": first.splits, "alpha": first.alpha, "sided": "two-sided",
            "zero_differences": "dropped (sign, wx-sr)",
            "direction_ties": "agree in direction with either side",
            "degenerate_tests": "not significant, p = 1"}
    return Table("split-half agreement", ["row", *cols], rows, {}, meta,
                 dict.fromkeys(range(len(AGREEMENT_ROWS)), "pct"))


def holdout_tables(rep: HoldoutReport) -> list[Table]:
    header = ["condition", "queryset", "scheme", "metric", "run_id", "aggregate",
              "leaderboard_rank", "expected_rank", "min", "q1", "median", "q3", "max"]
    rows = []
    for c in rep.conditions:
        exp = c.distribution.expected_rank
        quant = c.distribution.rank_quantiles
        for i in np.argsort(c.ranks, kind="stable"):
            rows.append([c.label, c.queryset, c.scheme_id, str(c.metric), c.matrix.run_ids[i],
                         float(c.aggregates[i]), int(c.ranks[i]), float(exp[i]), *quant[i].tolist()])
    meta = {"trials": rep.trials, "seed": rep.seed, "aggregation": rep.aggregation}
    for c in rep.conditions:
        if c.matrix.threshold is not None:
            meta[f"binarization_threshold[{c.label}]"] = c.matrix.threshold
    for p in rep.pruned:
        meta[f"pruned[{p.queryset}/{p.scheme_id}/{p.metric}]"] = p.reason
    tables = [Table("holdout conditions", header, rows,
                    {"aggregate": "dec", "expected_rank": "dec"}, meta)]
    if rep.focus_runs:
        fh = ["condition", "run_id", "leaderboard_rank", "expected_rank", "min", "q1", "median", "q3", "max"]
        frows = [[r[h] for h in fh] for r in rep.focus_rows()]
        tables.append(Table("focus run boxplot data", fh, frows, {"expected_rank": "dec"}))
    return tables


def scale_table(res: ScaleCheckResult) -> Table:
    rows = [
        ["value_set", "; ".join(render_value(v) for v in res.value_set)],
        ["gaps", "; ".join(render_value(v) for v in res.gaps)],
        ["equi_spaced", res.equi_spaced],
        ["solvable", res.solvable],
        ["exact_arithmetic", res.exact],
    ]
    if res.counterexample is not None:
        ce = res.counterexample
        rows += [
            ["counterexample_a", render_value(ce.a)],
            ["counterexample_b", render_value(ce.b)],
            ["counterexample_c", render_value(ce.c)],
            ["counterexample_d", render_value(ce.d)],
            ["witness_gap", render_value(ce.delta)],
            ["unrealizable_values", "; ".join(render_value(v) for v in ce.missing)],
        ]
    return Table("scale check", ["field", "value"], rows)


def sota_table(points: list[SotaPoint]) -> Table:
    rows = [[p.date.isoformat(), p.run_id, p.score, p.is_current_sota] for p in points]
    return Table("sota trajectory", ["date", "run_id", "score", "is_current_sota"], rows,
                 {"score": "dec"})


def trajectory_table(rows: list[dict]) -> Table:
    header = ["date", "run_id", "group_id", "score", "is_sota", "baseline"]
    return Table("submission trajectory", header, [[r[h] for h in header] for r in rows],
                 {"score": "dec"})


def violations_table(violations: list[Violation], meta: dict | None = None) -> Table:
    header = ["rule", "group_id", "window", "run_id", "submitted_on", "count", "limit"]
    rows = [[v.rule, v.group_id, v.window, v.run_id, v.submitted_on.isoformat(), v.count, v.limit]
            for v in violations]
    return Table("policy violations", header, rows, {}, meta or {})


def group_stats_table(stats: list[GroupStats]) -> Table:
    rows = [[s.group_id, s.count, s.first.isoformat(), s.last.isoformat()] for s in stats]
    return Table("group submission counts", ["group_id", "count", "first", "last"], rows)
