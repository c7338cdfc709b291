"""Submission governance: policy checks, per-group counts, SOTA trajectory."""

from __future__ import annotations

import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

from .corpus import LeaderboardManifest, Submission

WINDOWS = ("calendar-month", "rolling-30d")


@dataclass(frozen=True)
class SubmissionPolicy:
    max_runs_per_window: int = 2
    window: str = "calendar-month"
    max_minor_variants_per_window: int = 1

    def __post_init__(self):
        if self.max_runs_per_window < 0 or self.max_minor_variants_per_window < 0:
            raise ValueError("policy limits must be >= 0")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}; expected one of {WINDOWS}")


@dataclass(frozen=True)
class Violation:
    rule: str  # "max-runs" or "max-minor-variants"
    group_id: str
    window: str
    run_id: str
    submitted_on: dt.date
    count: int
    limit: int


@dataclass(frozen=True)
class GroupStats:
    group_id: str
    count: int
    first: dt.date
    last: dt.date


@dataclass(frozen=True)
class SotaPoint:
    run_id: str
    date: dt.date
    score: float
    is_current_sota: bool = False


def chronological(submissions) -> list[Submission]:
    return sorted(submissions, key=lambda s: (s.submitted_on, s.run_id))


def minor_variant_rule_enforceable(manifest: LeaderboardManifest) -> bool:
    """The minor-variant limit can only be checked when submissions carry variant tags."""
    return any(s.minor_variant is not None for s in manifest.submissions)


def _window_violations(subs: list[Submission], rule: str, limit: int, window: str) -> list[Violation]:
    out = []
    by_group = defaultdict(list)
    for s in subs:
        by_group[s.group_id].append(s)
    for group, items in by_group.items():
        if window == "calendar-month":
            per_month = defaultdict(int)
            for s in items:
                key = f"{s.submitted_on.year:04d}-{s.submitted_on.month:02d}"
                per_month[key] += 1
                if per_month[key] > limit:
                    out.append(Violation(rule, group, key, s.run_id, s.submitted_on, per_month[key], limit))
        else:
            for i, s in enumerate(items):
                start = s.submitted_on - dt.timedelta(days=29)
                count = sum(1 for t in items[: i + 1] if t.submitted_on >= start)
                if count > limit:
                    label = f"{start.isoformat()}..{s.submitted_on.isoformat()}"
                    out.append(Violation(rule, group, label, s.run_id, s.submitted_on, count, limit))
    return out


def check_submission_policy(manifest: LeaderboardManifest,
                            policy: SubmissionPolicy = SubmissionPolicy()) -> list[Violation]:
    """Flag every submission beyond its group's per-window allowance.

    Organizer baselines are exempt. The minor-variant rule is only checked when
    at least one submission is tagged; see ``minor_variant_rule_enforceable``.
    """
    subs = chronological(s for s in manifest.submissions if not s.baseline)
    found = _window_violations(subs, "max-runs", policy.max_runs_per_window, policy.window)
    if minor_variant_rule_enforceable(manifest):
        variants = [s for s in subs if s.minor_variant]
        found += _window_violations(
            variants, "max-minor-variants", policy.max_minor_variants_per_window, policy.window
        )
    return sorted(found, key=lambda v: (v.submitted_on, v.run_id, v.rule))


def group_stats(manifest: LeaderboardManifest, include_baselines: bool = True) -> list[GroupStats]:
    dates = defaultdict(list)
    for s in manifest.submissions:
        if include_baselines or not s.baseline:
            dates[s.group_id].append(s.submitted_on)
    rows = [GroupStats(g, len(d), min(d), max(d)) for g, d in dates.items()]
    return sorted(rows, key=lambda r: (-r.count, r.group_id))


def baseline_score_from(manifest: LeaderboardManifest, scores: Mapping[str, float]) -> float:
    """Best score among baseline-flagged submissions, or -inf when none are flagged."""
    vals = [scores[s.run_id] for s in manifest.submissions if s.baseline and s.run_id in scores]
    return max(vals, default=-math.inf)


def _check_scores(manifest, scores):
    missing = [s.run_id for s in manifest.submissions if s.run_id not in scores]
    if missing:
        raise ValueError(f"no leaderboard score for runs: {missing}")


def sota_trajectory(manifest: LeaderboardManifest, scores: Mapping[str, float],
                    baseline_score: float | None = None) -> list[SotaPoint]:
    """Running-maximum submissions that beat the baseline, in submission order."""
    _check_scores(manifest, scores)
    if baseline_score is None:
        baseline_score = baseline_score_from(manifest, scores)
    best = baseline_score
    points = []
    for s in chronological(manifest.submissions):
        score = float(scores[s.run_id])
        if score > best:
            points.append(SotaPoint(s.run_id, s.submitted_on, score))
        best = max(best, score)
    if points:
        last = points[-1]
        points[-1] = SotaPoint(last.run_id, last.date, last.score, True)
    return points


def trajectory_rows(manifest: LeaderboardManifest, scores: Mapping[str, float],
                    baseline_score: float | None = None) -> list[dict]:
    """Every submission as a (date, run_id, score, is_sota) row for plotting."""
    sota = {p.run_id for p in sota_trajectory(manifest, scores, baseline_score)}
    return [
        {"date": s.submitted_on.isoformat(), "run_id": s.run_id, "group_id": s.group_id,
         "score": float(scores[s.run_id]), "is_sota": s.run_id in sota, "baseline": s.baseline}
        for s in chronological(manifest.submissions)
    ]
