#!/usr/bin/env python3
"""Timing of the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both implementations are called directly, so the result does not depend on
ACCELSYNTH_DISABLE_NUMBA. Each kernel is warmed up once before timing
(numba compiles on first call).
"""
import argparse
import time

import numpy as np

from accelsynth import _kernels as K
from accelsynth.analysis import catalog, kron_expand
from accelsynth.objectives import random_quadratic


def _cases(rng):
    alg = kron_expand(catalog("triple_momentum", m=1.0, L=100.0), 10)
    obj = random_quadratic(10, 1.0, 100.0, rng)
    x0 = rng.standard_normal(alg.n)
    yield "simulate_quadratic (n=20, 2000 steps)", (
        alg.a, alg.b, alg.c, obj.hess, obj.lin, obj.z_star, x0, 2000, 1e12)

    blocks = rng.standard_normal((4, 6, 6))
    zs, ws = rng.standard_normal((2, 5000, 6))
    yield "fir_filter (ell=3, d=6, 5000 steps)", (blocks, zs)
    yield "weighted_inner (ell=3, d=6, 5000 steps)", (blocks, zs, ws)

    k, p = 120, 40
    dense = np.zeros((k, p, p))
    for i in range(k):
        r, c = rng.integers(0, p, 2)
        dense[i, r, c] = dense[i, c, r] = rng.standard_normal()
        dense[i, r, r] += 1.0
    g = rng.standard_normal((k, p, p))
    yield "schur_block (k=120, p=40, sparse)", (dense, *K.sparse_pattern(dense), g)


def _time(f, args, repeat):
    f(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        f(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if K.NUMBA_IMPL is None:
        raise SystemExit("numba is not importable")
    rng = np.random.default_rng(args.seed)
    names = {"simulate_quadratic", "fir_filter", "weighted_inner", "schur_block"}
    print(f"{'kernel':44s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, data in _cases(rng):
        name = next(n for n in names if label.startswith(n))
        t_np = _time(K.NUMPY_IMPL[name], data, args.repeat)
        t_nb = _time(K.NUMBA_IMPL[name], data, args.repeat)
        print(f"{label:44s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
