"""Acceptance gate: one test per release criterion.

Each test prints a single machine-readable pass/fail line; tolerances and
dataset settings are frozen here. The Monte-Carlo references are recomputed
on every run from fixed seeds (no cached numbers), so a pass certifies the
whole pipeline, not a lookup table.
"""

import math

import numpy as np
import pytest

from qcdeval.detectors import DetectorConfig, LikelihoodModel, run_detector
from qcdeval.harness import emit_curve, run_all, sweep
from qcdeval.metrics import (
    INF,
    METRIC_NAMES,
    DetectionOutcome,
    SequenceMeta,
    km_add,
    km_arl,
    lb_add,
    lb_arl,
    naive_arl,
)
from qcdeval.oracle import Dist, bias_bounds, true_add_mc, true_arl_mc
from qcdeval.simulate import SimSpec, simulate
from qcdeval.survival import SurvivalSample, fit_km, rmst

GAUSS = LikelihoodModel(kind="gaussian", mu0=0.0, mu1=0.1, var=0.1)

# GSR threshold frozen so the true mean run length sits near 150 (measured
# 150.88 +/- 0.13 at one million replications).
MID_THRESHOLD = 126.0


def report(criterion, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(autouse=True)
def _echo_report_lines(capsys):
    # pytest swallows stdout of passing tests; re-emit the pass/fail lines on
    # the real stream so they always appear in the run log.
    yield
    out = capsys.readouterr().out
    if out:
        with capsys.disabled():
            print(out, end="")


@pytest.fixture(scope="module")
def true_arl_mid():
    cfg = DetectorConfig(kind="gsr", threshold=MID_THRESHOLD, model=GAUSS)
    est = true_arl_mc(
        GAUSS, cfg, n_reps=1_000_000, horizon_cap=20_000, seed=7, chunk=128
    )
    assert est.sem / est.value <= 1e-3
    return est


def test_criterion_1_product_limit_hand_oracle():
    """fit_km + rmst reproduce the three hand-computed values exactly."""
    curve = fit_km(
        [
            SurvivalSample(1, True),
            SurvivalSample(2, False),
            SurvivalSample(3, True),
        ]
    )
    v1 = rmst(curve, 3.0).value

    metas = [
        SequenceMeta("a", 10, INF),
        SequenceMeta("b", 10, 5.0),
        SequenceMeta("c", 6, INF),
    ]
    outs = [
        DetectionOutcome("a", 3.0),
        DetectionOutcome("b", INF),
        DetectionOutcome("c", INF),
    ]
    v2 = km_arl(metas, outs).value

    metas_add = [SequenceMeta("A", 10, 2.0), SequenceMeta("B", 8, 3.0)]
    outs_add = [DetectionOutcome("A", 4.0), DetectionOutcome("B", INF)]
    v3 = km_add(metas_add, outs_add).value

    ok = (
        abs(v1 - 7 / 3) <= 1e-12
        and abs(v2 - 5.0) <= 1e-12
        and abs(v3 - 3.5) <= 1e-12
    )
    report(1, ok, f"hand values 7/3, 5, 3.5 -> {v1:.15f}, {v2}, {v3}")


def test_criterion_2_bias_bound_containment():
    """Monte-Carlo restricted-mean bias lies within the quadrature bounds
    (inflated by the 3-sigma MC CI) for 12/12 (family, n, a) cells."""
    pairs = [
        (Dist("exp", 1.0), Dist("unif", 0.0, 2.0)),
        (Dist("unif", 0.0, 1.0), Dist("exp", 1.0)),
    ]
    n_ok = 0
    cells = []
    for fam_idx, (event, censor) in enumerate(pairs):
        for n in (5, 20, 100):
            for a in (0.5, 1.0):
                rep = bias_bounds(
                    event, censor, n=n, a=a, mc_reps=10_000, seed=fam_idx
                )
                n_ok += rep.contained
                cells.append(rep.contained)
    report(2, n_ok == 12, f"containment {n_ok}/12 cells")


def test_criterion_3_exponential_decay():
    """Quadrature upper bound at n=100 is <= 1e-3 of the n=5 bound."""
    event, censor = Dist("exp", 1.0), Dist("unif", 0.0, 2.0)
    u5 = bias_bounds(event, censor, n=5, a=1.0, mc_reps=100).upper
    u100 = bias_bounds(event, censor, n=100, a=1.0, mc_reps=100).upper
    ratio = u100 / u5
    report(3, ratio <= 1e-3, f"upper(n=100)/upper(n=5) = {ratio:.3e}")


def test_criterion_4_truncation_bias_ordering(true_arl_mid):
    """Heavy truncation: Naive <= LB <= KM <= true, with KM within 10% of
    truth and LB at least 1.5x further away."""
    spec = SimSpec(
        model=GAUSS,
        n_sequences=100_000,
        length_law=("uniform", 30, 300),
        changepoint_law=("uniform",),
        with_change_fraction=0.9,
        seed=42,
    )
    ds = simulate(spec)
    cfg = DetectorConfig(kind="gsr", threshold=MID_THRESHOLD, model=GAUSS)
    outs = run_all(ds, cfg, workers=1)
    km = km_arl(ds.metas, outs).value
    lb = lb_arl(ds.metas, outs).value
    nv = naive_arl(ds.metas, outs).value
    truth = true_arl_mid.value
    ordered = nv <= lb <= km <= truth
    km_err = abs(km - truth)
    lb_err = abs(lb - truth)
    ok = ordered and km_err <= 0.10 * truth and lb_err >= 1.5 * km_err
    report(
        4,
        ok,
        f"naive {nv:.1f} <= lb {lb:.1f} <= km {km:.1f} <= true {truth:.1f}; "
        f"km err {km_err:.1f} ({km_err / truth:.1%}), lb err {lb_err:.1f}",
    )


def test_criterion_5_asymptotic_unbiasedness(true_arl_mid):
    """Light censoring (length 1000 >> true ARL): KM-ARL agrees with the
    oracle within 3 combined SEMs."""
    spec = SimSpec(
        model=GAUSS,
        n_sequences=10_000,
        length_law=("fixed", 1000),
        changepoint_law=("uniform",),
        with_change_fraction=0.1,
        seed=21,
    )
    ds = simulate(spec)
    cfg = DetectorConfig(kind="gsr", threshold=MID_THRESHOLD, model=GAUSS)
    outs = run_all(ds, cfg, workers=1)
    km = km_arl(ds.metas, outs)
    tol = 3.0 * math.hypot(km.sem, true_arl_mid.sem)
    diff = abs(km.value - true_arl_mid.value)
    report(
        5,
        diff <= tol and true_arl_mid.value <= 300.0,
        f"|km {km.value:.2f} - true {true_arl_mid.value:.2f}| = {diff:.2f} "
        f"<= 3 SEM = {tol:.2f}",
    )


def test_criterion_6_km_add_robustness():
    """Across thresholds with true mean delay <= 50, the censoring-aware
    delay estimate beats the selection-based one."""
    spec = SimSpec(
        model=GAUSS,
        n_sequences=10_000,
        length_law=("uniform", 10, 100),
        changepoint_law=("geometric", 0.001),
        with_change_fraction=1.0,
        seed=11,
    )
    ds = simulate(spec)
    rows = []
    ok = True
    for thr in (60.0, 100.0, 200.0, 400.0):
        cfg = DetectorConfig(kind="gsr", threshold=thr, model=GAUSS)
        truth = true_add_mc(
            GAUSS,
            cfg,
            ("geometric", 0.001),
            n_reps=200_000,
            horizon_cap=60_000,
            seed=5,
        )
        assert truth.value <= 50.0, f"grid misconfigured: true ADD {truth.value}"
        outs = run_all(ds, cfg, workers=1)
        km = km_add(ds.metas, outs).value
        lb = lb_add(ds.metas, outs).value
        km_err = abs(km - truth.value)
        lb_err = abs(lb - truth.value)
        ok &= km_err < lb_err
        rows.append(f"thr {thr:g}: km err {km_err:.2f} vs lb err {lb_err:.2f}")
    report(6, ok, "; ".join(rows))


def test_criterion_7_detector_recursions():
    """GSR recursion matches the direct double sum to 1e-10 relative on 1000
    short random cases; CUSUM stays non-negative and is threshold-monotone
    on 1000 random sequences."""
    rng = np.random.default_rng(1234)
    gsr_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        llr = rng.normal(0.0, 0.8, n)
        L = np.exp(llr)
        omega = float(rng.choice([0.0, 1.0, 4.0]))
        log_r = math.log(omega) if omega > 0 else -math.inf
        for t in range(n):
            log_r = np.logaddexp(log_r, 0.0) + llr[t]
            direct = omega * np.prod(L[: t + 1]) + sum(
                np.prod(L[k : t + 1]) for k in range(t + 1)
            )
            gsr_ok &= abs(math.exp(log_r) - direct) <= 1e-10 * direct

    cusum_ok = True
    for _ in range(1000):
        x = rng.normal(0.0, math.sqrt(0.1), 60)
        llr = GAUSS.llr(x)
        w, taus = 0.0, []
        for v in llr:
            w = max(0.0, w + v)
            cusum_ok &= w >= 0.0
        for t_lo, t_hi in ((0.5, 2.0), (1.0, 5.0)):
            cfg = DetectorConfig(kind="cusum", threshold=t_lo, model=GAUSS)
            tau_lo = run_detector(x, cfg).tau
            tau_hi = run_detector(x, cfg.with_threshold(t_hi)).tau
            cusum_ok &= tau_lo <= tau_hi
    report(7, gsr_ok and cusum_ok, f"gsr double-sum {gsr_ok}, cusum {cusum_ok}")


def test_criterion_8_determinism_and_causality(tmp_path):
    """Byte-identical curve CSV across 1 vs 8 workers; prefix invariance of
    the alarm time for all five detectors on 200 sequence/extension pairs."""
    spec = SimSpec(
        model=GAUSS,
        n_sequences=400,
        length_law=("uniform", 40, 120),
        changepoint_law=("uniform",),
        with_change_fraction=0.5,
        seed=33,
    )
    ds = simulate(spec)
    cfg = DetectorConfig(kind="gsr", threshold=1.0, model=GAUSS)
    grid = [3.0, 10.0, 30.0, 100.0]
    p1, p8 = tmp_path / "w1.csv", tmp_path / "w8.csv"
    emit_curve(sweep(ds, cfg, grid, METRIC_NAMES, workers=1), p1)
    emit_curve(sweep(ds, cfg, grid, METRIC_NAMES, workers=8), p8)
    deterministic = p1.read_bytes() == p8.read_bytes()

    configs = [
        DetectorConfig(kind="gsr", threshold=40.0, model=GAUSS),
        DetectorConfig(kind="cusum", threshold=3.0, model=GAUSS),
        DetectorConfig(kind="ewma", threshold=2.5, burn_in=15),
        DetectorConfig(kind="window-l1", threshold=8.0, window_size=8, burn_in=8),
        DetectorConfig(
            kind="window-normal", threshold=4.0, window_size=8, burn_in=8
        ),
    ]
    rng = np.random.default_rng(77)
    causal = True
    for cfg_c in configs:
        for _ in range(40):  # 5 detectors x 40 = 200 pairs
            n = int(rng.integers(40, 100))
            x = rng.normal(0.0, 0.5, n)
            ext = np.concatenate([x, rng.normal(1.5, 0.5, 40)])
            t1 = run_detector(x, cfg_c).tau
            t2 = run_detector(ext, cfg_c).tau
            causal &= (t2 == t1) if t1 != INF else (t2 == INF or t2 >= n)
    report(8, deterministic and causal, f"csv identical {deterministic}, causality {causal}")


def test_criterion_9_threshold_count_stability():
    """20-point sweep on a heavy-censoring dataset: KM metrics use every
    sequence at every threshold; the selection-based LB-ARL count varies."""
    spec = SimSpec(
        model=GAUSS,
        n_sequences=2000,
        length_law=("uniform", 20, 120),
        changepoint_law=("uniform",),
        with_change_fraction=0.7,
        seed=55,
    )
    ds = simulate(spec)
    cfg = DetectorConfig(kind="gsr", threshold=1.0, model=GAUSS)
    grid = list(np.geomspace(2.0, 500.0, 20))
    # The count-stability claim concerns the run-length estimators: the
    # censoring-aware one uses every sequence at every threshold, while the
    # selection-based one keeps only no-change sequences that alarmed. (The
    # delay estimator's eligible set necessarily varies with the threshold
    # because false alarms before the change are excluded.)
    res = sweep(ds, cfg, grid, ("km-arl", "lb-arl"), workers=4)
    km_arl_ns = {p.estimates["km-arl"].n_used for p in res.points}
    lb_ns = [p.estimates["lb-arl"].n_used for p in res.points]
    ok = km_arl_ns == {len(ds)} and len(set(lb_ns)) > 1
    report(
        9,
        ok,
        f"km-arl n_used {sorted(km_arl_ns)}, lb-arl n_used spans "
        f"{min(lb_ns)}..{max(lb_ns)} across 20 thresholds",
    )
