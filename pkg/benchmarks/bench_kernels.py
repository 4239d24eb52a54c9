#!/usr/bin/env python3
"""Compare the compiled scan kernels against the vectorized numpy fallback.

Two workloads:
 * low-threshold sweep (early alarms) — the compiled early-exit scan wins;
 * no-alarm streams (full scan) — vectorization narrows the gap.

Run: python benchmarks/bench_kernels.py [--frames 4000] [--sequences 200]
"""

import argparse
import time

import numpy as np

from qcdeval._kernels import _py

try:
    from qcdeval._kernels import _speedups
except ImportError:
    _speedups = None


def bench(fn, args_list, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--frames", type=int, default=4000)
    parser.add_argument("--sequences", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    drifting = [
        (rng.normal(0.05, 1.0, args.frames), 3.0, 0.0)
        for _ in range(args.sequences)
    ]
    quiet = [
        (rng.normal(-0.2, 1.0, args.frames), 1e9, 0.0)
        for _ in range(args.sequences)
    ]

    cases = [
        ("gsr early-alarm", "gsr_first_alarm", drifting),
        ("gsr full-scan", "gsr_first_alarm", quiet),
        ("cusum early-alarm", "cusum_first_alarm", [a[:2] for a in drifting]),
        ("cusum full-scan", "cusum_first_alarm", [a[:2] for a in quiet]),
    ]
    ewma = [
        (rng.normal(0.0, 1.0, args.frames), 0.2, 3.0, 30, 0.0, 1.0)
        for _ in range(args.sequences)
    ]
    cases.append(("ewma full-scan", "ewma_first_alarm", ewma))

    print(f"{args.sequences} sequences x {args.frames} frames, best of 3\n")
    print(f"{'kernel':20s} {'python (s)':>12s} {'compiled (s)':>13s} {'speedup':>8s}")
    for label, name, payload in cases:
        t_py = bench(getattr(_py, name), payload)
        if _speedups is None:
            print(f"{label:20s} {t_py:12.4f} {'n/a':>13s} {'n/a':>8s}")
            continue
        t_sp = bench(getattr(_speedups, name), payload)
        print(f"{label:20s} {t_py:12.4f} {t_sp:13.4f} {t_py / t_sp:7.1f}x")


if __name__ == "__main__":
    main()
