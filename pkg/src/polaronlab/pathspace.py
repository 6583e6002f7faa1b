"""Discretized paths and the interaction functional.

A path is a uniform time grid t_k = k * dt, k = 0..N, with x_0 = 0 unless
stated otherwise.  The tilt exponent splits into

    v_part = sum_i w_i V(x_i) dt                      (external part)
    w_part = sum_ij w_i w_j W(|x_i - x_j|, |i-j| dt) dt^2   (pair part)

with trapezoid weights w (1/2 at both ends).  The pair double sum runs over
all ordered pairs including the diagonal; time lags sit exactly on multiples
of dt, so the kernel table is resampled once per (grid, N, dt) combination
and the hot loops only interpolate in r.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import accel
from .errors import ValidationError
from .kernels import KernelGrid, PairKernel, eval_W


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscretePath:
    d: int
    dt: float
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise ValidationError(f"path points must have shape (N+1, {self.d})")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("path contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def n_steps(self):
        return self.points.shape[0] - 1

    @property
    def horizon(self):
        return self.n_steps * self.dt


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_wiener(d, n_steps, dt, seed, start=None):
    """Brownian path from start (default 0) with N independent increments."""
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    rng = _as_rng(seed)
    steps = rng.normal(scale=np.sqrt(dt), size=(n_steps, d))
    x0 = np.zeros(d) if start is None else np.asarray(start, dtype=float)
    pts = np.vstack([x0, x0 + np.cumsum(steps, axis=0)])
    return DiscretePath(d=d, dt=float(dt), points=pts)


def sample_bridge(x_a, x_b, duration, n_steps, seed):
    """Brownian bridge from x_a to x_b over the given duration, N steps."""
    x_a = np.atleast_1d(np.asarray(x_a, dtype=float))
    x_b = np.atleast_1d(np.asarray(x_b, dtype=float))
    if x_a.shape != x_b.shape:
        raise ValidationError("bridge endpoints must have the same dimension")
    if duration <= 0 or n_steps < 1:
        raise ValidationError("bridge needs positive duration and n_steps >= 1")
    rng = _as_rng(seed)
    d = x_a.size
    dt = duration / n_steps
    steps = rng.normal(scale=np.sqrt(dt), size=(n_steps, d))
    w = np.vstack([np.zeros(d), np.cumsum(steps, axis=0)])
    frac = (np.arange(n_steps + 1) * dt / duration)[:, None]
    pts = x_a + w - frac * (w[-1] - (x_b - x_a))
    return DiscretePath(d=d, dt=float(dt), points=pts)


def dump_path(path, fileobj):
    """CSV dump with columns step, t, x_1..x_d."""
    writer = csv.writer(fileobj)
    writer.writerow(["step", "t"] + [f"x_{i+1}" for i in range(path.d)])
    for k, row in enumerate(path.points):
        writer.writerow([k, repr(k * path.dt)] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# action evaluation
# ---------------------------------------------------------------------------

@dataclass
class ActionValue:
    v_part: float
    w_part: float
    coverage_misses: int = 0

    def total(self, delta, alpha):
        return delta * self.v_part + alpha * self.w_part


def trapezoid_weights(n_steps):
    w = np.ones(n_steps + 1)
    w[0] = w[-1] = 0.5
    return w


class PairTable:
    """Kernel table resampled onto the path's exact time lags.

    values[k, i] = W(r_i, k * dt) on the grid's uniform r axis.  Built once
    per (grid, n_steps, dt); shared by full sums and incremental deltas.
    """

    def __init__(self, grid: KernelGrid, n_steps: int, dt: float):
        self.dt = float(dt)
        self.n_steps = int(n_steps)
        self.r_nodes = grid.r_nodes
        self.inv_dr = 1.0 / grid.dr
        vals = np.empty((n_steps + 1, grid.r_nodes.size))
        for k in range(n_steps + 1):
            vals[k] = grid.row_at(k * dt)
        vals.setflags(write=False)
        self.values = vals


def build_pair_table(grid, n_steps, dt):
    return PairTable(grid, n_steps, dt)


def _resolve_table(path, interaction):
    if interaction is None:
        return None
    if isinstance(interaction, PairTable):
        if interaction.n_steps != path.n_steps or not np.isclose(interaction.dt, path.dt):
            raise ValidationError("pair table was built for a different (N, dt)")
        return interaction
    if isinstance(interaction, KernelGrid):
        return PairTable(interaction, path.n_steps, path.dt)
    if isinstance(interaction, PairKernel):
        # direct evaluation, no spatial interpolation; used by small exact checks
        return _exact_table(interaction, path)
    raise ValidationError("interaction must be a PairKernel, KernelGrid or PairTable")


def _exact_table(kernel, path):
    # evaluate per-lag rows on a fine r axis sized to the path's actual extent
    ext = float(np.max(np.sqrt(np.sum(path.points**2, axis=1))))
    r_max = max(4.0 * kernel.width, 2.5 * (2 * ext + 1e-9))
    grid = KernelGrid(kernel, r_max=r_max, t_max=path.horizon + path.dt,
                      n_r=2048, n_t=max(2, path.n_steps + 2))
    return PairTable(grid, path.n_steps, path.dt)


def action(path, potential, interaction=None, quadrature="trapezoid", backend=None):
    """Full tilt exponent parts for a path.

    interaction may be None (v_part only), a PairKernel (direct evaluation),
    a KernelGrid, or a prebuilt PairTable.  Lookups past the table's r range
    are far-field zeros and are counted in coverage_misses.
    """
    if quadrature != "trapezoid":
        raise ValidationError(f"unsupported quadrature rule {quadrature!r}")
    w = trapezoid_weights(path.n_steps)
    v_part = 0.0
    if potential is not None:
        r = np.sqrt(np.sum(path.points**2, axis=1))
        v_part = float(np.sum(w * potential.value_radial(r))) * path.dt
    table = _resolve_table(path, interaction)
    if table is None:
        return ActionValue(v_part=v_part, w_part=0.0)
    dsum, _ = accel.get_backend(backend)
    w_part, misses = dsum(path.points, w, table.values, table.inv_dr, path.dt)
    return ActionValue(v_part=v_part, w_part=float(w_part), coverage_misses=int(misses))


def action_delta_parts(path, start, stop, new_points, potential, table, backend=None):
    """(dv, dw, misses) when points[start:stop] are replaced by new_points."""
    n = path.n_steps + 1
    if not (0 <= start < stop <= n):
        raise ValidationError("block out of range")
    new_points = np.ascontiguousarray(new_points, dtype=np.float64)
    if new_points.shape != (stop - start, path.d):
        raise ValidationError("replacement block has wrong shape")
    w = trapezoid_weights(path.n_steps)
    dv = 0.0
    if potential is not None:
        r_new = np.sqrt(np.sum(new_points**2, axis=1))
        r_old = np.sqrt(np.sum(path.points[start:stop] ** 2, axis=1))
        dv = float(np.sum(w[start:stop] * (potential.value_radial(r_new)
                                           - potential.value_radial(r_old)))) * path.dt
    if table is None:
        return dv, 0.0, 0
    _, bdelta = accel.get_backend(backend)
    dw, misses = bdelta(path.points, w, table.values, table.inv_dr, path.dt,
                        start, stop, new_points)
    return dv, float(dw), int(misses)


def action_delta(path, start, stop, new_points, potential, table,
                 delta, alpha, backend=None):
    """Change of the combined exponent delta*v_part + alpha*w_part."""
    dv, dw, _ = action_delta_parts(path, start, stop, new_points, potential,
                                   table, backend=backend)
    return delta * dv + alpha * dw


def action_exact_smooth(path, potential, kernel):
    """Reference evaluation with per-lag closed-form kernel values (no table).

    Only meaningful for families with cheap vectorized evaluation; used by
    quadrature-order tests where interpolation error must not intrude.
    """
    w = trapezoid_weights(path.n_steps)
    r = np.sqrt(np.sum(path.points**2, axis=1))
    v_part = float(np.sum(w * potential.value_radial(r))) * path.dt if potential else 0.0
    pts = path.points
    acc = float(np.sum(w * w)) * float(eval_W(kernel, 0.0, 0.0))
    for k in range(1, path.n_steps + 1):
        dif = pts[k:] - pts[:-k]
        rr = np.sqrt(np.sum(dif * dif, axis=1))
        acc += 2.0 * float(np.sum(w[k:] * w[:-k] * eval_W(kernel, rr, k * path.dt)))
    return ActionValue(v_part=v_part, w_part=acc * path.dt**2)
