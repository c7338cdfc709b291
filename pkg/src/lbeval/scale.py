"""Measurement-scale checks for rank metrics over enumerated SERP states.

A SERP state is an ordered tuple of relevance grades. For a metric we collect
the distinct values it takes over all states of a given depth and grade count
and test whether that value set is equi-spaced and whether it satisfies the
solvability axiom of a difference structure: for all a, b, c, d with
0 <= v_c - v_d <= v_a - v_b there must be x, y with
v_a - v_x = v_c - v_d = v_y - v_b.

RR, AP and NCG values are rational and handled as ``Fraction``. NDCG values
involve 1/log2(i+1) and are irrational; they are computed with mpmath at
``NDCG_DIGITS`` significant digits and compared with tolerance ``NDCG_TOL``.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath

from .errors import ResourceError
from .metrics import MetricSpec, average_precision, gain_of, ncg, reciprocal_rank

STATE_CAP = 1_000_000
VALUE_SET_CAP = 512
NDCG_DIGITS = 60
NDCG_TOL = mpmath.mpf(10) ** -40


@dataclass(frozen=True)
class StateSpace:
    depth: int
    grades: int
    states: tuple[tuple[int, ...], ...]

    def descending(self) -> tuple[tuple[int, ...], ...]:
        """States from (g-1, ..., g-1) down to (0, ..., 0)."""
        return self.states[::-1]


@dataclass(frozen=True)
class Counterexample:
    a: object
    b: object
    c: object
    d: object
    delta: object
    missing: tuple  # values v_a - delta and/or v_b + delta absent from the set


@dataclass(frozen=True)
class ScaleCheckResult:
    value_set: tuple
    equi_spaced: bool
    gaps: tuple
    solvable: bool
    counterexample: Counterexample | None = None
    exact: bool = True


def enumerate_states(n: int, g: int, cap: int = STATE_CAP) -> StateSpace:
    if n < 1 or g < 2:
        raise ValueError("need depth n >= 1 and grade count g >= 2")
    size = g**n
    if size > cap:
        raise ResourceError(f"{g}^{n} = {size} states exceeds the cap of {cap}")
    states = tuple(itertools.product(range(g), repeat=n))
    return StateSpace(n, g, states)


def _ndcg_mp(state: Sequence[int], k: int, gain: str):
    def dcg(grades):
        return mpmath.fsum(
            mpmath.mpf(int(gain_of(g, gain))) / mpmath.log(i + 1, 2)
            for i, g in enumerate(grades[:k], start=1)
            if g > 0
        )
    ideal = dcg(sorted(state, reverse=True))
    return mpmath.mpf(0) if ideal == 0 else dcg(list(state)) / ideal


def state_value(state: Sequence[int], spec: MetricSpec):
    """Metric value of one SERP state; ideal gains come from the state itself."""
    k = spec.cutoff or len(state)
    if spec.binary:
        t = spec.binarization_threshold or 1
        binary = [int(g >= t) for g in state]
        if spec.kind == "RR":
            return reciprocal_rank(binary, k, exact=True)
        return average_precision(binary[:k], sum(binary), exact=True)
    if spec.kind == "NCG":
        return ncg(list(state), state, k, spec.gain, exact=True)
    return _ndcg_mp(state, k, spec.gain)


def _dedupe_mp(values):
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > NDCG_TOL:
            out.append(v)
    return out


def metric_value_set(space: StateSpace, spec: MetricSpec) -> tuple:
    """Distinct metric values over the state space, ascending."""
    if spec.kind == "NDCG":
        with mpmath.workdps(NDCG_DIGITS):
            return tuple(_dedupe_mp(state_value(s, spec) for s in space.states))
    return tuple(sorted({state_value(s, spec) for s in space.states}))


def metric_values_by_state(space: StateSpace, spec: MetricSpec) -> list:
    if spec.kind == "NDCG":
        with mpmath.workdps(NDCG_DIGITS):
            return [state_value(s, spec) for s in space.states]
    return [state_value(s, spec) for s in space.states]


class _Values:
    """Sorted value set with exact or tolerance-based membership."""

    def __init__(self, values):
        self.values = sorted(values)
        self.exact = all(isinstance(v, (int, Fraction)) for v in self.values)
        self._set = set(self.values) if self.exact else None

    def eq(self, x, y) -> bool:
        return x == y if self.exact else abs(x - y) <= NDCG_TOL

    def contains(self, x) -> bool:
        if self.exact:
            return x in self._set
        i = bisect.bisect_left(self.values, x - NDCG_TOL)
        return i < len(self.values) and self.values[i] <= x + NDCG_TOL


def _differences(vals: _Values) -> list[tuple[object, object, object]]:
    """Distinct non-negative differences with the first (c, d) pair realizing each."""
    diffs = []
    for c in vals.values:
        for d in vals.values:
            if d <= c:
                diffs.append((c - d, c, d))
    diffs.sort(key=lambda t: t[0])
    out = []
    for delta, c, d in diffs:
        if not out or not vals.eq(delta, out[-1][0]):
            out.append((delta, c, d))
    return out


def solvability_check(value_set: Sequence) -> ScaleCheckResult:
    """Equi-spacing and solvability of a numeric value set.

    The counterexample is the first failure scanning a from the largest value
    down, b from the smallest value up, and the difference from small to large.
    """
    if not value_set:
        raise ValueError("value set must be non-empty")
    if len(value_set) > VALUE_SET_CAP:
        raise ResourceError(f"value set of size {len(value_set)} exceeds the cap of {VALUE_SET_CAP}")
    with mpmath.workdps(NDCG_DIGITS):
        vals = _Values(value_set)
        v = vals.values
        consecutive = [y - x for x, y in zip(v, v[1:])]
        gaps = []
        for gap in sorted(consecutive):
            if not gaps or not vals.eq(gap, gaps[-1]):
                gaps.append(gap)
        equi = len(gaps) <= 1

        diffs = [t for t in _differences(vals) if not vals.eq(t[0], 0)]
        lo, hi = v[0], v[-1]
        # Smallest difference that cannot be subtracted from v_a (resp. added to v_b)
        # while staying within reach of some partner value.
        bad_a = {}
        for a in v:
            for delta, c, d in diffs:
                if delta > a - lo and not vals.eq(delta, a - lo):
                    break
                if not vals.contains(a - delta):
                    bad_a[a] = (delta, c, d)
                    break
        bad_b = {}
        for b in v:
            for delta, c, d in diffs:
                if delta > hi - b and not vals.eq(delta, hi - b):
                    break
                if not vals.contains(b + delta):
                    bad_b[b] = (delta, c, d)
                    break

        counter = None
        for a in reversed(v):
            for b in v:
                if b > a:
                    break
                span = a - b
                fails = [t for t in (bad_a.get(a), bad_b.get(b))
                         if t is not None and (t[0] <= span or vals.eq(t[0], span))]
                if fails:
                    delta, c, d = min(fails, key=lambda t: t[0])
                    missing = tuple(x for x in (a - delta, b + delta) if not vals.contains(x))
                    counter = Counterexample(a, b, c, d, delta, missing)
                    break
            if counter:
                break
    return ScaleCheckResult(tuple(v), equi, tuple(gaps), counter is None, counter, vals.exact)


def check_difference_axioms(value_set: Sequence, max_size: int = 8) -> dict[str, bool]:
    """Brute-force the order axioms of a difference structure under the numeric order.

    Element order must be weak. Differences must flip sign when swapped and
    combine monotonically when concatenated.
    """
    v = list(value_set)
    if len(v) > max_size:
        raise ResourceError(f"axiom brute force limited to {max_size} values")

    def le(x, y):
        return x <= y

    weak_order = all(le(a, b) or le(b, a) for a in v for b in v) and all(
        le(a, c) for a in v for b in v for c in v if le(a, b) and le(b, c)
    )
    sign_reversal = all(
        le(d - c, b - a)
        for a, b, c, d in itertools.product(v, repeat=4)
        if le(a - b, c - d)
    )
    monotone = all(
        le(a1 - c1, a2 - c2)
        for a1, b1, c1, a2, b2, c2 in itertools.product(v, repeat=6)
        if le(a1 - b1, a2 - b2) and le(b1 - c1, b2 - c2)
    )
    return {"weak_order": weak_order, "sign_reversal": sign_reversal, "monotonicity": monotone}


def scale_check(n: int, g: int, spec: MetricSpec) -> ScaleCheckResult:
    return solvability_check(metric_value_set(enumerate_states(n, g), spec))


def render_value(v, digits: int = 4) -> str:
    """'1/3 (0.3333)' for rationals, a decimal for high-precision reals."""
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v} ({float(v):.{digits}f})"
    return mpmath.nstr(v, digits + 2)
