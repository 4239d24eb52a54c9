"""End-to-end evaluation pipeline.

Ingests labeled datasets, sweeps detector thresholds, computes the five
metrics with SEMs per threshold, and renders the results as CSV and as a
hand-rolled SVG tradeoff plot.

Determinism contract: identical (dataset hash, detector config, grid) yield
byte-identical CSV regardless of the worker count; detector runs fan out per
sequence but results are reduced in dataset order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detectors import DetectorConfig, run_detector
from .metrics import INF, DetectionOutcome, SequenceMeta, compute_metric
from .simulate import LabeledDataset

__all__ = [
    "IngestReport",
    "CurvePoint",
    "SweepResult",
    "ingest",
    "sweep",
    "emit_curve",
    "write_manifest",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IngestReport:
    n_loaded: int
    n_dropped_short: int
    n_rejected: int
    diagnostics: tuple = ()


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    estimates: dict  # metric name -> MetricEstimate
    wall_time_ms: int


@dataclass(frozen=True)
class SweepResult:
    dataset_hash: str
    config: DetectorConfig
    thresholds: tuple
    points: list[CurvePoint]
    t_max: float  # largest possible run-length observation in the dataset
    delta_t_max: float  # largest possible delay observation


def _parse_record(obj: dict, line_no: int):
    try:
        seq_id = str(obj["id"])
        values = np.asarray(obj["values"], dtype=np.float64)
        nu = obj["nu"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed record at line {line_no}: {exc}") from None
    if values.ndim not in (1, 2) or values.shape[0] == 0:
        raise ValueError(f"malformed record at line {line_no}: bad values shape")
    return seq_id, values, INF if nu is None else float(nu)


def _iter_jsonl(path):
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed record at line {line_no}: {exc}") from None
            yield _parse_record(obj, line_no)


def _iter_csv(path):
    """CSV layout: one sequence per row, ``id,nu,v0,v1,...`` with an empty
    nu field meaning no change."""
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) < 3:
                raise ValueError(f"malformed record at line {line_no}: too few fields")
            try:
                nu = INF if row[1] == "" else float(row[1])
                values = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"malformed record at line {line_no}: {exc}") from None
            yield row[0], values, nu


def ingest(path, fmt: str = "jsonl", min_length: int = 2) -> LabeledDataset:
    """Load and validate a labeled dataset.

    Sequences shorter than ``min_length`` are dropped; records whose
    changepoint does not index an observed frame (nu >= T) are rejected.
    Both are counted in the report attached as ``dataset.ingest_report``.
    Structurally malformed records raise with their line number.
    """
    if min_length < 1:
        raise ValueError("min_length must be >= 1")
    records = _iter_jsonl(path) if fmt == "jsonl" else _iter_csv(path)
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown format: {fmt}")
    metas, values = [], []
    dropped = rejected = 0
    diagnostics = []
    for seq_id, vals, nu in records:
        length = vals.shape[0]
        if length < min_length:
            dropped += 1
            continue
        if nu != INF and (nu < 0 or nu != int(nu) or nu >= length):
            rejected += 1
            diagnostics.append(
                f"{seq_id}: changepoint {nu} does not index a frame of length {length}"
            )
            continue
        metas.append(SequenceMeta(id=seq_id, length_T=length, changepoint_nu=nu))
        values.append(vals)
    dataset = LabeledDataset(metas=metas, values=values)
    dataset.ingest_report = IngestReport(
        n_loaded=len(metas),
        n_dropped_short=dropped,
        n_rejected=rejected,
        diagnostics=tuple(diagnostics),
    )
    for diag in diagnostics:
        log.warning("rejected record: %s", diag)
    if dropped:
        log.info("%d sequence(s) dropped below min_length=%d", dropped, min_length)
    return dataset


def _safe_run(values, config: DetectorConfig, seq_id: str) -> DetectionOutcome:
    try:
        return run_detector(values, config, seq_id)
    except Exception as exc:  # degrade to "no alarm"; crash == no detection
        log.warning("detector failed on %s: %s", seq_id, exc)
        return DetectionOutcome(id=seq_id, tau=INF)


def run_all(dataset: LabeledDataset, config: DetectorConfig, workers: int | None = None):
    """Run the detector on every sequence, in dataset order."""
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(dataset) <= 1:
        return [
            _safe_run(v, config, m.id) for m, v in zip(dataset.metas, dataset.values)
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(
                _safe_run,
                dataset.values,
                [config] * len(dataset),
                [m.id for m in dataset.metas],
            )
        )


def observation_bounds(dataset: LabeledDataset) -> tuple[float, float]:
    """Largest possible run-length and delay observations: max of min(nu, T)
    and max of T - nu over with-change sequences. These bound the horizons of
    the censoring-aware estimators; beyond them the curves extrapolate."""
    t_max = 0.0
    delta_t_max = 0.0
    for m in dataset.metas:
        t_max = max(t_max, min(m.changepoint_nu, m.length_T))
        if m.changepoint_nu != INF:
            delta_t_max = max(delta_t_max, m.length_T - m.changepoint_nu)
    return t_max, delta_t_max


def sweep(
    dataset: LabeledDataset,
    config: DetectorConfig,
    thresholds,
    metrics,
    workers: int | None = None,
) -> SweepResult:
    """Evaluate the requested metrics at every threshold of the grid."""
    thresholds = tuple(float(t) for t in thresholds)
    if not thresholds:
        raise ValueError("empty threshold grid")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")
    metrics = tuple(metrics)
    if not metrics:
        raise ValueError("no metrics requested")

    points = []
    for thr in thresholds:
        start = time.perf_counter()
        outcomes = run_all(dataset, config.with_threshold(thr), workers)
        estimates = {
            name: compute_metric(name, dataset.metas, outcomes) for name in metrics
        }
        wall_ms = int((time.perf_counter() - start) * 1000)
        points.append(
            CurvePoint(threshold=thr, estimates=estimates, wall_time_ms=wall_ms)
        )
    t_max, delta_t_max = observation_bounds(dataset)
    return SweepResult(
        dataset_hash=dataset.content_hash(),
        config=config,
        thresholds=thresholds,
        points=points,
        t_max=t_max,
        delta_t_max=delta_t_max,
    )


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def emit_curve(result: SweepResult, out_path, fmt: str = "csv") -> None:
    """Write a sweep as CSV (one row per threshold x metric) or as an SVG
    tradeoff scatter (log-x ARL vs ADD, error bars, shaded region past the
    largest observable run length)."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["threshold", "metric", "value", "sem", "n_used", "extrapolation_flag"]
        )
        for p in result.points:
            for name, est in p.estimates.items():
                writer.writerow(
                    [
                        repr(p.threshold),
                        name,
                        _fmt(est.value),
                        _fmt(est.sem),
                        est.n_used,
                        int(est.extrapolation_flag),
                    ]
                )
        with open(out_path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    elif fmt == "svg":
        with open(out_path, "w") as fh:
            fh.write(_render_svg(result))
    else:
        raise ValueError(f"unknown curve format: {fmt}")


_SVG_W, _SVG_H = 640, 480
_MARGIN = 60


def _pairs(result: SweepResult, arl_name: str, add_name: str):
    for p in result.points:
        arl = p.estimates.get(arl_name)
        add = p.estimates.get(add_name)
        if arl and add and arl.value is not None and add.value is not None:
            yield arl, add


def _render_svg(result: SweepResult) -> str:
    families = [("km", "km-arl", "km-add"), ("lb", "lb-arl", "lb-add")]
    xs, ys = [], []
    for _, arl_name, add_name in families:
        for arl, add in _pairs(result, arl_name, add_name):
            xs.append(max(arl.value, 1e-3))
            ys.append(add.value)
    if not xs:
        xs, ys = [1.0], [1.0]
    x_lo = min(min(xs), max(result.t_max, 1e-3)) / 1.5
    x_hi = max(max(xs), result.t_max if result.t_max > 0 else 1.0) * 1.5
    y_lo, y_hi = 0.0, max(max(ys), 1.0) * 1.1

    def sx(v):
        v = max(v, 1e-9)
        frac = (math.log10(v) - math.log10(x_lo)) / (
            math.log10(x_hi) - math.log10(x_lo)
        )
        return _MARGIN + frac * (_SVG_W - 2 * _MARGIN)

    def sy(v):
        frac = (v - y_lo) / (y_hi - y_lo)
        return _SVG_H - _MARGIN - frac * (_SVG_H - 2 * _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    # Shaded extrapolation region: run lengths beyond the largest observable
    # time cannot be estimated without extrapolating the survival curve.
    if result.t_max > 0 and result.t_max < x_hi:
        x0 = sx(result.t_max)
        parts.append(
            f'<rect class="extrapolation-region" x="{x0:.2f}" y="{_MARGIN}" '
            f'width="{_SVG_W - _MARGIN - x0:.2f}" '
            f'height="{_SVG_H - 2 * _MARGIN}" fill="#dddddd" opacity="0.6"/>'
        )
    # Axes.
    parts.append(
        f'<line x1="{_MARGIN}" y1="{_SVG_H - _MARGIN}" x2="{_SVG_W - _MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>'
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>'
        f'<text x="{_SVG_W // 2}" y="{_SVG_H - 15}" text-anchor="middle">'
        "mean run length (log scale)</text>"
        f'<text x="15" y="{_SVG_H // 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {_SVG_H // 2})">mean detection delay</text>'
    )
    colors = {"km": "#1f77b4", "lb": "#d62728"}
    for fam, arl_name, add_name in families:
        color = colors[fam]
        for arl, add in _pairs(result, arl_name, add_name):
            cx, cy = sx(max(arl.value, 1e-3)), sy(add.value)
            if arl.sem:
                parts.append(
                    f'<line class="errorbar-{fam}" '
                    f'x1="{sx(max(arl.value - arl.sem, 1e-9)):.2f}" y1="{cy:.2f}" '
                    f'x2="{sx(arl.value + arl.sem):.2f}" y2="{cy:.2f}" '
                    f'stroke="{color}"/>'
                )
            if add.sem:
                parts.append(
                    f'<line class="errorbar-{fam}" x1="{cx:.2f}" '
                    f'y1="{sy(max(add.value - add.sem, y_lo)):.2f}" x2="{cx:.2f}" '
                    f'y2="{sy(min(add.value + add.sem, y_hi)):.2f}" '
                    f'stroke="{color}"/>'
                )
            parts.append(
                f'<circle class="marker-{fam}" cx="{cx:.2f}" cy="{cy:.2f}" '
                f'r="4" fill="{color}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_manifest(path, *, command: str, config: dict, seed: int, dataset_hash=None):
    """Persist a reproducibility manifest. Written before any result file so
    a run that dies mid-way still records what it was doing."""
    from . import __version__

    manifest = {
        "tool": "qcdeval",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "dataset_hash": dataset_hash,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
