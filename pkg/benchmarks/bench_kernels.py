"""Time the numba kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--seconds 0.25] [--repeat 3]

Both backends run the same inputs; the numba timing excludes JIT compilation.
Reported figures are microseconds per sample and the numba speed-up.
"""

import argparse
import time

import numpy as np

from vsbanc import kernels
from vsbanc.controller import filtered_reference


def fxlms_args(K, M, L, Ls, n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    d = rng.standard_normal((M, n))
    s = rng.standard_normal((K, M, Ls)) * 0.1
    xf = np.ascontiguousarray(filtered_reference(x, s))
    return x, d, xf, s, np.zeros((K, L)), 1e-5, 0.0, 0.0, 0, 0, np.zeros((0, K, L))


def lms_args(M, Ls, n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n), rng.standard_normal((M, n)), np.zeros((M, Ls)), 1e-4, 1


def best_time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        fresh = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
        t0 = time.perf_counter()
        fn(*fresh)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=0.25, help="signal length at 16 kHz")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    n = int(args.seconds * 16000)
    cases = [
        ("fxlms 1x1 L=16", "fxlms_loop", fxlms_args(1, 1, 16, 16, n)),
        ("fxlms 4x4 L=128", "fxlms_loop", fxlms_args(4, 4, 128, 128, n)),
        ("lms   M=4 L=128", "lms_loop", lms_args(4, 128, n)),
    ]
    if kernels.fxlms_loop_numba is None:
        print("numba is not available; only the numpy backend can run")
    print(f"{n} samples per run, best of {args.repeat}")
    print(f"{'case':<18}{'numpy us/samp':>15}{'numba us/samp':>15}{'speed-up':>10}")
    for label, name, case in cases:
        t_np = best_time(getattr(kernels, f"{name}_numpy"), case, args.repeat)
        fast = getattr(kernels, f"{name}_numba")
        if fast is None:
            print(f"{label:<18}{1e6 * t_np / n:>15.2f}{'-':>15}{'-':>10}")
            continue
        fast(*[a.copy() if isinstance(a, np.ndarray) else a for a in case])  # compile
        t_nb = best_time(fast, case, args.repeat)
        print(f"{label:<18}{1e6 * t_np / n:>15.2f}{1e6 * t_nb / n:>15.3f}{t_np / t_nb:>9.0f}x")


if __name__ == "__main__":
    main()
