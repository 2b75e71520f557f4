"""Time the numba and numpy variants of the MCD kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Both variants run in the same process (the ``accel`` argument selects one),
so the numba timings exclude compilation: every kernel is called once before
timing starts. Subsets returned by the two variants are compared as well.
"""

import argparse
import time

import numpy as np

from mcdtheory import _kernels
from mcdtheory._numba import use_numba
from mcdtheory.estimator import mcd_cstep, subset_size


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    X20 = rng.standard_normal((20, 2))
    X2000 = rng.standard_normal((2000, 2))
    X5k = rng.standard_normal((5000, 3))
    T, C = X5k.mean(axis=0), np.cov(X5k, rowvar=False)
    Cinv = np.linalg.inv(C)
    h20, h2000 = subset_size(20, 0.75), subset_size(2000, 0.75)
    start = rng.choice(2000, size=3, replace=False)
    return [
        ("mahalanobis n=5000 k=3", lambda a: _kernels.mahalanobis_sq(X5k, T, Cinv, accel=a)),
        ("exact n=20 h=15 k=2", lambda a: _kernels.exact_search(X20, h20, accel=a)[0]),
        ("cstep chain n=2000 k=2", lambda a: _kernels.cstep_chain(X2000, start, h2000, accel=a)[0]),
        ("mcd_cstep n=2000 10 restarts",
         lambda a: mcd_cstep(X2000, 0.75, restarts=10, accel=a).subset),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not use_numba():
        print("numba unavailable or disabled; timing the numpy kernels only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<32}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  agree")
    for name, fn in cases(rng):
        t_np, out_np = best_of(lambda: fn(False), args.repeat)
        if use_numba():
            fn(True)  # compile
            t_nb, out_nb = best_of(lambda: fn(True), args.repeat)
            agree = np.allclose(out_np, out_nb, rtol=1e-10)
            print(f"{name:<32}{t_np:>12.4g}{t_nb:>12.4g}{t_np / t_nb:>10.1f}  {agree}")
        else:
            print(f"{name:<32}{t_np:>12.4g}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
