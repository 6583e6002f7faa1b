"""Timing comparison of the compiled and pure-Python pair-sum backends.

Times the full double sum and a representative block update across path
lengths, prints a table with the speedup factor, and verifies that both
backends agree on the numbers they produce.

Run:  python benchmarks/bench_pathsum.py [--sizes 128,256,512,1024]
"""

import argparse
import time

import numpy as np

from polaronlab.accel import HAVE_COMPILED, get_backend
from polaronlab.kernels import KernelGrid, PairKernel
from polaronlab.pathspace import (build_pair_table, sample_wiener,
                                  trapezoid_weights)


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="128,256,512,1024")
    ap.add_argument("--horizon", type=float, default=16.0)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    kernel = PairKernel.gaussian_omega1(d=3, width=1.0)
    if not HAVE_COMPILED:
        print("compiled backend unavailable; timing pure Python only")

    py_ds, py_bd = get_backend("python")
    backends = [("python", py_ds, py_bd)]
    if HAVE_COMPILED:
        cy_ds, cy_bd = get_backend("cython")
        backends.insert(0, ("cython", cy_ds, cy_bd))

    print(f"{'N':>6} {'op':>10}", end="")
    for name, _, _ in backends:
        print(f" {name + ' [ms]':>14}", end="")
    if len(backends) == 2:
        print(f" {'speedup':>9}", end="")
    print()

    for n in sizes:
        dt = args.horizon / n
        grid = KernelGrid(kernel, r_max=16.0, t_max=args.horizon,
                          n_r=600, n_t=n + 1)
        table = build_pair_table(grid, n, dt)
        path = sample_wiener(3, n, dt, seed=0)
        weights = trapezoid_weights(n)
        block = (n // 3, n // 3 + max(2, n // 8))
        new_block = path.points[block[0]:block[1]] + 0.1

        results = {}
        for name, double_sum, block_delta in backends:
            full = _time(lambda ds=double_sum: ds(
                path.points, weights, table.values, table.inv_dr, dt))
            upd = _time(lambda bd=block_delta: bd(
                path.points, weights, table.values, table.inv_dr, dt,
                block[0], block[1], new_block))
            val_full = backends[0][1](path.points, weights, table.values,
                                      table.inv_dr, dt)[0]
            val_this = double_sum(path.points, weights, table.values,
                                  table.inv_dr, dt)[0]
            scale = max(abs(val_full), 1e-30)
            if abs(val_full - val_this) > 1e-9 * scale:
                raise SystemExit(
                    f"backend disagreement at N={n}: {val_full} vs {val_this}")
            results[name] = (full, upd)

        for op_idx, op in enumerate(("double_sum", "block_delta")):
            print(f"{n:>6} {op:>10}", end="")
            for name, _, _ in backends:
                print(f" {results[name][op_idx] * 1e3:>14.3f}", end="")
            if len(backends) == 2:
                ratio = results["python"][op_idx] / \
                    max(results["cython"][op_idx], 1e-12)
                print(f" {ratio:>8.1f}x", end="")
            print()


if __name__ == "__main__":
    main()
