"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 200000]

Prints one line per kernel and problem size with the best-of-``repeat``
wall time for each backend and the speedup.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from dcaplm import _kernels_py
from dcaplm.spline_basis import make_knots

try:
    from dcaplm import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_basis(n, degree, interior, repeat):
    z = np.random.default_rng(0).random(n)
    knots = make_knots(degree, interior)
    py = _best(lambda: _kernels_py.bspline_design(z, knots, degree), repeat)
    cy = _best(lambda: _kernels.bspline_design(z, knots, degree), repeat) if _kernels else float("nan")
    return py, cy


def bench_scores(n_groups, n, d1, B, repeat):
    gen = np.random.default_rng(1)
    N = n_groups * n
    S = gen.standard_normal((N, d1))
    E = gen.standard_normal((B, N))
    off = np.arange(0, N + 1, n, dtype=np.int64)
    py = _best(lambda: _kernels_py.group_score_sums(S, E, off), repeat)
    cy = _best(lambda: _kernels.group_score_sums(S, E, off), repeat) if _kernels else float("nan")
    return py, cy


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=200_000)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; only the numpy fallback is timed")
    print(f"{'kernel':<40} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for degree, interior in ((1, 5), (3, 5), (3, 20)):
        py, cy = bench_basis(args.n, degree, interior, args.repeat)
        print(f"{f'bspline_design n={args.n} deg={degree} J={interior}':<40} {py:10.4f} {cy:10.4f} {py / cy:8.2f}")
    for s, n, B in ((16, 128, 32), (64, 128, 32), (32, 1024, 32)):
        py, cy = bench_scores(s, n, 1, B, args.repeat)
        print(f"{f'group_score_sums s={s} n={n} B={B}':<40} {py:10.4f} {cy:10.4f} {py / cy:8.2f}")


if __name__ == "__main__":
    main()
