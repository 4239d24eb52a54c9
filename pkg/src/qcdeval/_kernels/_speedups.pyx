# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled first-alarm scan kernels.

Same contracts as qcdeval._kernels._py, but scanning stops at the first
threshold crossing, which is the hot path when sweeping low thresholds over
large datasets or running Monte-Carlo oracles.
"""

from libc.math cimport exp, log, log1p, sqrt, fabs, INFINITY


def gsr_first_alarm(double[::1] llr, double log_threshold, double omega):
    cdef Py_ssize_t t, n = llr.shape[0]
    cdef double log_r
    log_r = log(omega) if omega > 0.0 else -INFINITY
    for t in range(n):
        # log R <- logaddexp(log R, 0) + llr[t]
        if log_r > 0.0:
            log_r = log_r + log1p(exp(-log_r))
        else:
            log_r = log1p(exp(log_r))
        log_r += llr[t]
        # 1e-12 slack keeps exact-tie thresholds (R == threshold) from being
        # missed by one ulp of logaddexp rounding.
        if log_r >= log_threshold - 1e-12:
            return t
    return -1


def cusum_first_alarm(double[::1] llr, double threshold):
    cdef Py_ssize_t t, n = llr.shape[0]
    cdef double w = 0.0
    for t in range(n):
        w += llr[t]
        if w < 0.0:
            w = 0.0
        if w >= threshold:
            return t
    return -1


def ewma_first_alarm(double[::1] x, double lam, double threshold,
                     Py_ssize_t burn_in, double mu0, double sigma0):
    cdef Py_ssize_t t, n = x.shape[0]
    # Track d = Z - mu0 so a constant sequence at mu0 stays at exactly zero
    # deviation instead of accumulating rounding noise.
    cdef double d = 0.0
    cdef double decay = (1.0 - lam) * (1.0 - lam)
    cdef double decay_pow = 1.0
    cdef double base = lam / (2.0 - lam)
    cdef double width
    if n == 0 or burn_in >= n:
        return -1
    for t in range(n):
        d = lam * (x[t] - mu0) + (1.0 - lam) * d
        decay_pow *= decay
        if t >= burn_in:
            width = sigma0 * sqrt(base * (1.0 - decay_pow))
            if fabs(d) >= threshold * width:
                return t
    return -1
