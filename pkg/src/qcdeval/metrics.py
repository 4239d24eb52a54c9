"""Run-length and detection-delay estimators over labeled sequence datasets.

Builds censored survival samples from (sequence, changepoint, detection)
triples and computes the censoring-aware estimators (KM-ARL, KM-ADD) next to
the conventional selection-based baselines (LB-ARL, LB-ADD, Naive ARL).

Conventions: the changepoint ``nu`` and the detection point ``tau`` are frame
indices, with ``math.inf`` meaning "no change" / "no alarm". A sequence
contributes to the ARL samples as an observed event only when its alarm
strictly precedes min(nu, T); a tie counts as censored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .survival import SurvivalSample, fit_km, max_last_observed, rmst

__all__ = [
    "INF",
    "SequenceMeta",
    "DetectionOutcome",
    "MetricEstimate",
    "METRIC_NAMES",
    "arl_samples",
    "add_samples",
    "km_arl",
    "km_add",
    "lb_arl",
    "lb_add",
    "naive_arl",
    "compute_metric",
]

INF = math.inf

METRIC_NAMES = ("km-arl", "km-add", "lb-arl", "lb-add", "naive-arl")


@dataclass(frozen=True)
class SequenceMeta:
    """Labels of one observed sequence: its length and changepoint."""

    id: str
    length_T: int
    changepoint_nu: float  # non-negative int, or math.inf for "no change"

    def __post_init__(self):
        if self.length_T < 1:
            raise ValueError(f"length_T must be >= 1, got {self.length_T}")
        nu = self.changepoint_nu
        if nu != INF and (nu < 0 or nu != int(nu)):
            raise ValueError(f"invalid changepoint: {nu!r}")


@dataclass(frozen=True)
class DetectionOutcome:
    """First alarm frame of a detector on one sequence (inf = no alarm)."""

    id: str
    tau: float


@dataclass(frozen=True)
class MetricEstimate:
    name: str
    value: float | None
    sem: float | None
    n_used: int
    upper_limit: float | None
    extrapolation_flag: bool = False

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "sem": self.sem,
            "n_used": self.n_used,
            "upper_limit": self.upper_limit,
            "extrapolation_flag": self.extrapolation_flag,
        }


def _undefined(name: str) -> MetricEstimate:
    return MetricEstimate(name=name, value=None, sem=None, n_used=0, upper_limit=None)


def _pair(metas, outcomes):
    """Match metas and outcomes by id, validating uniqueness and alarms."""
    meta_by_id = {}
    for m in metas:
        if m.id in meta_by_id:
            raise ValueError(f"duplicate sequence id: {m.id}")
        meta_by_id[m.id] = m
    seen = set()
    pairs = []
    for o in outcomes:
        if o.id in seen:
            raise ValueError(f"duplicate outcome id: {o.id}")
        seen.add(o.id)
        m = meta_by_id.get(o.id)
        if m is None:
            raise ValueError(f"outcome id not in dataset: {o.id}")
        if o.tau != INF and not (0 <= o.tau < m.length_T):
            raise ValueError(
                f"alarm at {o.tau} outside sequence {o.id} of length {m.length_T}"
            )
        pairs.append((m, o))
    if len(pairs) != len(meta_by_id):
        missing = set(meta_by_id) - seen
        raise ValueError(f"missing outcomes for ids: {sorted(missing)[:5]}")
    return pairs


def arl_samples(metas, outcomes) -> list[SurvivalSample]:
    """One censored sample per sequence for the run-length curve.

    Event at tau when tau < min(nu, T); otherwise censored at min(nu, T).
    """
    samples = []
    for m, o in _pair(metas, outcomes):
        censor = min(m.changepoint_nu, m.length_T)
        if o.tau < censor:
            samples.append(SurvivalSample(time=float(o.tau), event=True))
        else:
            samples.append(SurvivalSample(time=float(censor), event=False))
    return samples


def add_samples(metas, outcomes) -> list[SurvivalSample]:
    """Censored delay samples for the detection-delay curve.

    Only sequences with a changepoint and no false alarm before it are
    eligible; a finite alarm contributes the delay tau - nu as an event,
    a missing alarm contributes T - nu as censored.
    """
    samples = []
    for m, o in _pair(metas, outcomes):
        nu = m.changepoint_nu
        if nu == INF:
            continue
        if o.tau != INF and o.tau < nu:
            continue  # false alarm before the change
        if o.tau != INF:
            samples.append(SurvivalSample(time=float(o.tau - nu), event=True))
        else:
            samples.append(SurvivalSample(time=float(m.length_T - nu), event=False))
    return samples


def _km_estimate(name, samples, upper_limit):
    if not samples:
        return _undefined(name)
    curve = fit_km(samples)
    a = max_last_observed(samples) if upper_limit is None else float(upper_limit)
    rm = rmst(curve, a)
    sem = math.sqrt(rm.variance / curve.n_samples)
    # Extrapolation: the horizon exceeds the data, or the curve never drops
    # below 1 so the whole estimate is the horizon itself.
    flag = rm.extrapolated or (
        curve.survival_at(a) > 0.0 and abs(rm.value - a) <= 1e-12 * max(a, 1.0)
    )
    return MetricEstimate(
        name=name,
        value=rm.value,
        sem=sem,
        n_used=curve.n_samples,
        upper_limit=a,
        extrapolation_flag=flag,
    )


def km_arl(metas, outcomes, upper_limit=None) -> MetricEstimate:
    """Area under the run-length survival curve up to the horizon
    (default: the maximum last-observed time)."""
    return _km_estimate("km-arl", arl_samples(metas, outcomes), upper_limit)


def km_add(metas, outcomes, upper_limit=None) -> MetricEstimate:
    """Area under the delay survival curve up to the horizon
    (default: the maximum last-observed delay over eligible sequences)."""
    return _km_estimate("km-add", add_samples(metas, outcomes), upper_limit)


def _mean_estimate(name, values):
    if not values:
        return _undefined(name)
    arr = np.asarray(values, dtype=np.float64)
    sem = float(np.std(arr, ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return MetricEstimate(
        name=name,
        value=float(arr.mean()),
        sem=sem,
        n_used=arr.size,
        upper_limit=None,
    )


def lb_arl(metas, outcomes) -> MetricEstimate:
    """Mean alarm time over no-change sequences that did alarm."""
    taus = [
        o.tau
        for m, o in _pair(metas, outcomes)
        if m.changepoint_nu == INF and o.tau != INF
    ]
    return _mean_estimate("lb-arl", taus)


def lb_add(metas, outcomes) -> MetricEstimate:
    """Mean delay over with-change sequences detected at or after the change."""
    delays = [
        o.tau - m.changepoint_nu
        for m, o in _pair(metas, outcomes)
        if m.changepoint_nu != INF and o.tau != INF and o.tau >= m.changepoint_nu
    ]
    return _mean_estimate("lb-add", delays)


def naive_arl(metas, outcomes) -> MetricEstimate:
    """Mean alarm time over all sequences alarming before their changepoint
    (includes false alarms on with-change sequences)."""
    taus = [
        o.tau
        for m, o in _pair(metas, outcomes)
        if o.tau != INF and o.tau < m.changepoint_nu
    ]
    return _mean_estimate("naive-arl", taus)


_METRIC_FUNCS = {
    "km-arl": km_arl,
    "km-add": km_add,
    "lb-arl": lb_arl,
    "lb-add": lb_add,
    "naive-arl": naive_arl,
}


def compute_metric(name: str, metas, outcomes) -> MetricEstimate:
    try:
        func = _METRIC_FUNCS[name]
    except KeyError:
        raise ValueError(f"unknown metric: {name}") from None
    return func(metas, outcomes)
