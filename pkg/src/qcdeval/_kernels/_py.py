"""Numpy fallback implementations of the first-alarm kernels.

Each function returns the first frame index at which the detector statistic
crosses its threshold, or -1 when no alarm is raised within the sequence.
They are semantically identical to the compiled versions; the compiled ones
stop scanning at the alarm, these compute the whole statistic vectorized.
"""

import numpy as np


def gsr_first_alarm(llr, log_threshold, omega):
    # R(t) = (R(t-1) + 1) L(t), R(-1) = omega, computed in log space:
    # log R(t) = c_t + log(omega + sum_{k<=t} exp(-c_{k-1})) with c the
    # cumulative log-likelihood ratio and c_{-1} = 0.
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.size == 0:
        return -1
    c = np.cumsum(llr)
    prefix = np.concatenate(([0.0], c[:-1]))
    inner = np.logaddexp.accumulate(-prefix)
    if omega > 0.0:
        inner = np.logaddexp(np.log(omega), inner)
    log_r = c + inner
    # 1e-12 slack keeps exact-tie thresholds (R == threshold) from being
    # missed by one ulp of logaddexp rounding.
    hits = np.nonzero(log_r >= log_threshold - 1e-12)[0]
    return int(hits[0]) if hits.size else -1


def cusum_first_alarm(llr, threshold):
    # W(t) = max(0, W(t-1) + llr_t) = c_t - min(0, c_0, ..., c_t).
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.size == 0:
        return -1
    c = np.cumsum(llr)
    floor = np.minimum(np.minimum.accumulate(c), 0.0)
    w = c - floor
    hits = np.nonzero(w >= threshold)[0]
    return int(hits[0]) if hits.size else -1


def ewma_first_alarm(x, lam, threshold, burn_in, mu0, sigma0):
    # Z(-1) = mu0; Z(t) = lam x_t + (1-lam) Z(t-1); alarm when the deviation
    # from mu0 exceeds threshold times the exact (time-varying) control-limit
    # width sigma0 * sqrt(lam/(2-lam) * (1 - (1-lam)^(2(t+1)))).
    from scipy.signal import lfilter

    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.size
    if n == 0 or burn_in >= n:
        return -1
    # Track d = Z - mu0 so a constant sequence at mu0 stays at exactly zero
    # deviation instead of accumulating rounding noise.
    d, _ = lfilter([lam], [1.0, -(1.0 - lam)], x - mu0, zi=[0.0])
    t = np.arange(n, dtype=np.float64)
    width = sigma0 * np.sqrt(
        lam / (2.0 - lam) * (1.0 - (1.0 - lam) ** (2.0 * (t + 1.0)))
    )
    dev = np.abs(d)
    alarms = (dev >= threshold * width) & (t >= burn_in)
    hits = np.nonzero(alarms)[0]
    return int(hits[0]) if hits.size else -1
