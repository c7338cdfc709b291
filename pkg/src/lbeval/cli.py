"""Command-line entry point: ``lbeval <command> ...``.

Commands: eval, bootstrap, agreement, holdout, monitor, scale-check. Seeds are
always explicit flags; there is no environment-variable default.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .agreement import DEFAULT_COLUMNS, DEFAULT_SPLITS, agreement_table
from .bootstrap import DEFAULT_TRIALS, bootstrap_ranks
from .corpus import (DEFAULT_DEPTH, load_leaderboard_config, load_manifest_runs, parse_qrels,
                     parse_run)
from .errors import LbevalError
from .holdout import holdout_compare
from .metrics import parse_metric_spec, score_matrix
from .monitor import (WINDOWS, SubmissionPolicy, check_submission_policy, group_stats,
                      minor_variant_rule_enforceable, sota_trajectory, trajectory_rows)
from .report import (Table, emit_report, group_stats_table, provenance, to_tables,
                     trajectory_table, violations_table)
from .scale import scale_check
from .stats import DEFAULT_ALPHA, METHODS

log = logging.getLogger("lbeval")


class _Inputs:
    """Runs, qrels and query ids resolved from the common input flags."""

    def __init__(self, args):
        self.paths: list[str] = []
        self.manifest = self.partition = None
        if getattr(args, "manifest", None):
            if not args.partition:
                raise LbevalError("--manifest requires --partition")
            self.manifest, self.partition = _load_config(args.manifest, args.partition)
            self.paths += [args.manifest, args.partition]
            self.paths += [self.manifest.run_path(s) for s in self.manifest.submissions]
            self.runs = load_manifest_runs(self.manifest, args.depth)
        else:
            if not args.run:
                raise LbevalError("give run files with --run or a --manifest")
            self.runs = []
            for path in args.run:
                with open(path, "rb") as fh:
                    self.runs.append(parse_run(fh, args.depth, source=path))
                self.paths.append(path)
        ids = [r.run_id for r in self.runs]
        if len(set(ids)) != len(ids):
            raise LbevalError(f"duplicate run ids: {ids}")
        self.qrels = []
        for item in getattr(args, "qrels", None) or []:
            if os.path.exists(item) or ":" not in item:
                path, scheme = item, ""
            else:
                path, _, scheme = item.rpartition(":")
            scheme = scheme or os.path.splitext(os.path.basename(path))[0]
            with open(path, "rb") as fh:
                self.qrels.append(parse_qrels(fh, scheme, source=path))
            self.paths.append(path)

    def query_ids(self, which: str, qrels):
        if which == "judged":
            return sorted(qrels.grades)
        if self.partition is None:
            raise LbevalError(f"--queries {which} needs --manifest/--partition")
        return sorted(getattr(self.partition, f"{which}_ids"))


def _load_config(manifest_path, partition_path):
    with open(manifest_path, "rb") as m, open(partition_path, "rb") as p:
        return load_leaderboard_config(m, p, os.path.dirname(os.path.abspath(manifest_path)))


def _config_echo(args) -> dict:
    skip = {"func", "command"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k not in skip}


def _write(args, name: str, tables: list[Table], prov: dict) -> None:
    data = emit_report(tables, args.format, prov)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        ext = "csv" if args.format == "csv" else "json"
        with open(os.path.join(args.out_dir, f"{name}.{ext}"), "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


def _single_matrix(args, inputs: _Inputs):
    if len(inputs.qrels) != 1:
        raise LbevalError("this command takes exactly one --qrels file")
    qrels = inputs.qrels[0]
    spec = parse_metric_spec(args.metric)
    return score_matrix(inputs.runs, qrels, spec, inputs.query_ids(args.queries, qrels))


def cmd_eval(args) -> None:
    inputs = _Inputs(args)
    if len(inputs.qrels) != 1:
        raise LbevalError("eval takes exactly one --qrels file")
    qrels = inputs.qrels[0]
    qids = inputs.query_ids(args.queries, qrels)
    tables = []
    for text in args.metric or ["rr@10"]:
        tables += to_tables(score_matrix(inputs.runs, qrels, parse_metric_spec(text), qids))
    _write(args, "eval", tables, provenance("eval", _config_echo(args), inputs.paths))


def cmd_bootstrap(args) -> None:
    inputs = _Inputs(args)
    matrix = _single_matrix(args, inputs)
    dist = bootstrap_ranks(matrix, args.trials, args.seed, args.aggregation)
    tables = to_tables(dist)
    tables[0].meta["metric"] = str(matrix.metric)
    if matrix.threshold is not None:
        tables[0].meta["binarization_threshold"] = matrix.threshold
    _write(args, "bootstrap", tables, provenance("bootstrap", _config_echo(args), inputs.paths))


def cmd_agreement(args) -> None:
    inputs = _Inputs(args)
    matrix = _single_matrix(args, inputs)
    if args.columns:
        columns = [tuple(c.split("/")) for c in args.columns]
    else:
        columns = list(DEFAULT_COLUMNS)
        if args.include_t_median:
            columns.append(("t", "median"))
    reports = agreement_table(matrix, columns, args.splits, args.seed, args.alpha)
    tables = to_tables(reports)
    tables[0].meta["metric"] = str(matrix.metric)
    _write(args, "agreement", tables, provenance("agreement", _config_echo(args), inputs.paths))


def cmd_holdout(args) -> None:
    inputs = _Inputs(args)
    if not inputs.qrels:
        raise LbevalError("holdout needs at least one --qrels FILE[:SCHEME]")
    specs = [parse_metric_spec(m) for m in (args.metric or ["rr@10", "ndcg@10"])]
    report = holdout_compare(inputs.runs, inputs.partition, inputs.qrels, specs,
                             args.trials, args.seed, args.focus or (), args.aggregation)
    _write(args, "holdout", to_tables(report),
           provenance("holdout", _config_echo(args), inputs.paths))


def cmd_monitor(args) -> None:
    inputs = _Inputs(args)
    manifest = inputs.manifest
    policy = SubmissionPolicy(args.max_runs, args.window, args.max_minor_variants)
    violations = check_submission_policy(manifest, policy)
    enforceable = minor_variant_rule_enforceable(manifest)
    vmeta = {"max_runs_per_window": policy.max_runs_per_window, "window": policy.window,
             "max_minor_variants_per_window": policy.max_minor_variants_per_window,
             "minor_variant_rule": "checked" if enforceable else "unenforceable (no variant tags)",
             "baselines": "exempt"}
    tables = [violations_table(violations, vmeta), group_stats_table(group_stats(manifest))]
    if inputs.qrels:
        matrix = _single_matrix(args, inputs)
        scores = dict(zip(matrix.run_ids, matrix.aggregate("mean").tolist()))
        traj = trajectory_table(trajectory_rows(manifest, scores, args.baseline_score))
        traj.meta["metric"] = str(matrix.metric)
        traj.meta["sota_points"] = len(sota_trajectory(manifest, scores, args.baseline_score))
        tables.append(traj)
    _write(args, "monitor", tables, provenance("monitor", _config_echo(args), inputs.paths))


def cmd_scale_check(args) -> None:
    spec = parse_metric_spec(args.metric)
    result = scale_check(args.depth, args.grades, spec)
    tables = to_tables(result)
    tables[0].meta.update({"metric": str(spec), "depth": args.depth, "grades": args.grades,
                           "ideal": "each state's own grade multiset"})
    _write(args, "scale-check", tables, provenance("scale-check", _config_echo(args)))


def _add_inputs(p, qrels_many=False, metric_many=False, partition_required=False):
    p.add_argument("--run", action="append", help="run file (repeatable)")
    p.add_argument("--manifest", help="leaderboard manifest (JSON)")
    p.add_argument("--partition", required=partition_required, help="public/private query partition (JSON)")
    p.add_argument("--qrels", action="append",
                   help="qrels file, optionally FILE:SCHEME" + (" (repeatable)" if qrels_many else ""))
    p.add_argument("--queries", choices=("judged", "public", "private"), default="judged",
                   help="query set to evaluate (default: every judged query)")
    if metric_many:
        p.add_argument("--metric", action="append", help="metric spec, e.g. rr@10 (repeatable)")
    else:
        p.add_argument("--metric", default="rr@10", help="metric spec (default rr@10)")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH, help="run depth cap (default 1000)")


def _add_output(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out-dir", help="write report files here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lbeval {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="per-query metric scores")
    _add_inputs(p, metric_many=True)
    _add_output(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bootstrap", help="bootstrap rank distributions")
    _add_inputs(p)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--aggregation", choices=("mean", "median"), default="mean")
    _add_output(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("agreement", help="split-half significance agreement")
    _add_inputs(p)
    p.add_argument("--splits", type=int, default=DEFAULT_SPLITS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--columns", nargs="+", metavar="TEST/AGG",
                   help=f"columns such as sign/mean; tests: {', '.join(METHODS)}")
    p.add_argument("--include-t-median", action="store_true",
                   help="add a median-aggregation t-test column to the default layout")
    _add_output(p)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("holdout", help="public vs private leaderboard comparison")
    _add_inputs(p, qrels_many=True, metric_many=True, partition_required=True)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--aggregation", choices=("mean", "median"), default="mean")
    p.add_argument("--focus", action="append", help="run id to highlight (repeatable)")
    _add_output(p)
    p.set_defaults(func=cmd_holdout)

    p = sub.add_parser("monitor", help="submission policy, group counts, SOTA trajectory")
    _add_inputs(p, partition_required=True)
    p.add_argument("--max-runs", type=int, default=2)
    p.add_argument("--max-minor-variants", type=int, default=1)
    p.add_argument("--window", choices=WINDOWS, default="calendar-month")
    p.add_argument("--baseline-score", type=float,
                   help="default: best score among baseline-flagged runs")
    _add_output(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("scale-check", help="equi-spacing and solvability of a metric's values")
    p.add_argument("--metric", default="rr@3")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--grades", type=int, default=2)
    _add_output(p)
    p.set_defaults(func=cmd_scale_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="lbeval: %(levelname)s: %(message)s", stream=sys.stderr)
    if args.command == "monitor" and not args.manifest:
        parser.error("monitor requires --manifest")
    if args.command == "holdout" and not args.manifest:
        parser.error("holdout requires --manifest")
    try:
        args.func(args)
    except (LbevalError, ValueError, OSError) as exc:
        print(f"lbeval: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
