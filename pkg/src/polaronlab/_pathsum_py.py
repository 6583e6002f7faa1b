"""Pure NumPy twin of the compiled pair-sum kernels.

Same contract as _pathsum: table[k, i] = W(i * dr, k * dt), linear
interpolation in r, far field 0 past the last node, miss counting.
Reduction order differs from the compiled path (per-lag vectorized sums),
so cross-backend agreement is approximate at the 1e-12 level, not bitwise.
"""

import numpy as np


def _interp_rows(table_row, u, n_r):
    i0 = np.minimum(u.astype(np.int64), n_r - 2)
    frac = u - i0
    return table_row[i0] + (table_row[i0 + 1] - table_row[i0]) * frac


def double_sum(points, weights, table, inv_dr, dt):
    points = np.ascontiguousarray(points, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    n, _ = points.shape
    n_r = table.shape[1]
    misses = 0
    acc = float(np.sum(weights * weights)) * table[0, 0]
    for k in range(1, n):
        dif = points[k:] - points[:-k]
        r = np.sqrt(np.sum(dif * dif, axis=1))
        u = r * inv_dr
        ok = u <= n_r - 1
        misses += int(np.sum(~ok))
        vals = np.zeros_like(r)
        if np.any(ok):
            vals[ok] = _interp_rows(table[k], u[ok], n_r)
        acc += 2.0 * float(np.sum(weights[k:] * weights[:-k] * vals))
    return acc * dt * dt, misses


def _pair_vals(table, k_arr, r_arr, inv_dr, n_r):
    u = r_arr * inv_dr
    ok = u <= n_r - 1
    vals = np.zeros_like(r_arr)
    if np.any(ok):
        i0 = np.minimum(u[ok].astype(np.int64), n_r - 2)
        frac = u[ok] - i0
        rows = table[k_arr[ok], i0]
        rows_hi = table[k_arr[ok], i0 + 1]
        vals[ok] = rows + (rows_hi - rows) * frac
    return vals, int(np.sum(~ok))


def block_delta(points, weights, table, inv_dr, dt, start, stop, new_block):
    points = np.ascontiguousarray(points, dtype=np.float64)
    new_block = np.ascontiguousarray(new_block, dtype=np.float64)
    n, _ = points.shape
    n_r = table.shape[1]
    outside = np.concatenate([np.arange(0, start), np.arange(stop, n)])
    acc = 0.0
    misses = 0
    w = weights
    for i in range(start, stop):
        k_arr = np.abs(outside - i)
        dif_new = new_block[i - start] - points[outside]
        dif_old = points[i] - points[outside]
        r_new = np.sqrt(np.sum(dif_new * dif_new, axis=1))
        r_old = np.sqrt(np.sum(dif_old * dif_old, axis=1))
        v_new, m1 = _pair_vals(table, k_arr, r_new, inv_dr, n_r)
        v_old, m2 = _pair_vals(table, k_arr, r_old, inv_dr, n_r)
        misses += m1 + m2
        acc += 2.0 * float(np.sum(w[outside] * (v_new - v_old))) * w[i]
    for i in range(start, stop):
        js = np.arange(i + 1, stop)
        if js.size == 0:
            continue
        k_arr = js - i
        dif_new = new_block[i - start] - new_block[js - start]
        dif_old = points[i] - points[js]
        r_new = np.sqrt(np.sum(dif_new * dif_new, axis=1))
        r_old = np.sqrt(np.sum(dif_old * dif_old, axis=1))
        v_new, m1 = _pair_vals(table, k_arr, r_new, inv_dr, n_r)
        v_old, m2 = _pair_vals(table, k_arr, r_old, inv_dr, n_r)
        misses += m1 + m2
        acc += 2.0 * float(np.sum(w[js] * (v_new - v_old))) * w[i]
    return acc * dt * dt, misses
