"""Time the compiled history-sum kernel against the numpy fallback.

Usage: python benchmarks/kernel_benchmark.py [sizes...]
"""

import sys
import time

import numpy as np

from etasbayes import _hawkes_np
from etasbayes.backend import HAVE_COMPILED

if HAVE_COMPILED:
    from etasbayes import _hawkes_c


def synthetic_arrays(n, rng):
    times = np.sort(rng.uniform(0, 1000, n))
    dm = rng.exponential(1.0 / np.log(10), n)
    prefix = np.arange(n, dtype=np.int64)
    return times, dm, times, prefix


def run(fn, arrays, repeats=3):
    times, dm, tgts, prefix = arrays
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(times, dm, tgts, prefix, 0.1, 0.089, 2.29, 0.11, 1.08, True)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    sizes = [int(s) for s in sys.argv[1:]] or [500, 2000, 5000]
    rng = np.random.default_rng(7)
    print(f"{'n':>7} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for n in sizes:
        arrays = synthetic_arrays(n, rng)
        t_np = run(_hawkes_np.point_logintensity_terms, arrays)
        if HAVE_COMPILED:
            t_c = run(_hawkes_c.point_logintensity_terms, arrays)
            a, _ = _hawkes_np.point_logintensity_terms(*arrays, 0.1, 0.089,
                                                       2.29, 0.11, 1.08, False)
            b, _ = _hawkes_c.point_logintensity_terms(*arrays, 0.1, 0.089,
                                                      2.29, 0.11, 1.08, False)
            assert np.allclose(a, b, rtol=1e-12), "backend mismatch"
            print(f"{n:>7} {t_np * 1e3:>10.2f} {t_c * 1e3:>12.2f} "
                  f"{t_np / t_c:>8.1f}x")
        else:
            print(f"{n:>7} {t_np * 1e3:>10.2f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
