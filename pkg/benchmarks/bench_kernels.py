"""Time the compiled kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat R] [--samples N ...]``.
Prints one row per (kernel, size) with the best-of-R time of each backend,
the speedup and the largest absolute difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from gkyp import _kernels_py, kernels

try:
    from gkyp import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(rng, N, n, m):
    Phi = 0.99 * np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))[0]
    Gam = rng.standard_normal((n, m)) + 0j
    v = rng.standard_normal((N, m)) + 1j * rng.standard_normal((N, m))
    a = rng.standard_normal((N, n)) + 1j * rng.standard_normal((N, n))
    b = rng.standard_normal((N, n)) + 1j * rng.standard_normal((N, n))
    w = rng.uniform(0.5, 1.0, N)
    M = rng.standard_normal((n + m, n + m)) + 0j
    z = rng.standard_normal((N, n + m)) + 1j * rng.standard_normal((N, n + m))
    x0 = np.zeros(n, dtype=complex)
    return {
        "propagate": lambda impl: kernels.propagate(Phi, Gam, x0, v, impl=impl),
        "weighted_outer_sum": lambda impl: kernels.weighted_outer_sum(a, b, w, impl=impl),
        "weighted_quadform_sum": lambda impl: kernels.weighted_quadform_sum(z, M, w, impl=impl),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--samples", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=2)
    args = p.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'N':>8}{'python s':>12}{'cython s':>12}{'speedup':>9}{'max diff':>11}")
    for N in args.samples:
        for name, call in _cases(rng, N, args.n, args.m).items():
            t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat))
            if _compiled is None:
                print(f"{name:<24}{N:>8}{t_py:>12.2e}{'-':>12}{'-':>9}{'-':>11}")
                continue
            t_c = min(timeit.repeat(lambda: call(_compiled), number=1, repeat=args.repeat))
            diff = np.abs(np.asarray(call(_kernels_py)) - np.asarray(call(_compiled))).max()
            print(f"{name:<24}{N:>8}{t_py:>12.2e}{t_c:>12.2e}{t_py / t_c:>9.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
