"""Compare the numba kernels against the pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [n]
"""

import sys
import time

import numpy as np

from nls_lab.backend import NUMBA_IMPL, NUMPY_IMPL


def bench(label, fn, args, repeats=20):
    fn(*[a.copy() if isinstance(a, np.ndarray) else a for a in args])  # warm up / compile
    best = float("inf")
    for _ in range(repeats):
        fresh = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
        t0 = time.perf_counter()
        fn(*fresh)
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<18s} {best * 1e6:10.1f} us")
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1 << 16
    rng = np.random.default_rng(0)
    v = (rng.standard_normal(n) + 1j * rng.standard_normal(n)).astype(np.complex128)

    cases = [
        ("nonlinear_phase", (v, 3.0, 3.5, 1e-3, 1e-3)),
        ("flow_kick", (v, 1e-3, 1e-3, 3.0, 3.5)),
        ("power_sums", (v, 5.0, 5.5)),
        ("abs_pow_sum", (v, 4.0)),
    ]
    print(f"n = {n}")
    for name, args in cases:
        print(name)
        t_np = bench("numpy", NUMPY_IMPL[name], args)
        t_nb = bench("numba", NUMBA_IMPL[name], args)
        print(f"  {'speedup':<18s} {t_np / t_nb:10.2f}x")


if __name__ == "__main__":
    main()
