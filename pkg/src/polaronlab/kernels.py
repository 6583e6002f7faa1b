"""External potentials and translation-invariant pair interaction kernels.

Two kernel families are built in:

``gaussian-omega1``
    Gaussian coupling function with a flat dispersion relation.  For a
    coupling of unit width in dimension d the kernel has the closed form

        W(r, t) = (pi^(d/2) / 4) * exp(-t) * exp(-r^2 / 4),

    with the width c entering as (pi c^2)^(d/2)/4 * exp(-t) * exp(-r^2/(4 c^2)).

``nelson3d``
    Massless dispersion omega(k) = |k| in d = 3 with a Gaussian momentum
    cutoff of width w.  Evaluated by radial Fourier quadrature,

        W(r, t) = pi w^6 * int_0^inf k^2 exp(-w^2 k^2) exp(-t k) sinc(k r) dk,

    where sinc(x) = sin(x)/x.  The same function has a direct-space
    representation as a triple convolution; the two routes are checked
    against each other in the test suite.

Both families are attractive and enter the path weight with a positive
sign, so W >= 0 everywhere and W decreases in both r and t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NumericError, ValidationError

_MONOTONE_RTOL = 1e-9  # relative tolerance for grid monotonicity checks


# ---------------------------------------------------------------------------
# external potential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExternalPotential:
    """Radial, non-negative, non-increasing attractive potential depth profile.

    The coupling strength multiplies this profile, so well profiles are
    normalized to unit depth.  ``value_radial`` returns the depth at radius r.
    """

    family: str
    radius: float = 1.0
    r_nodes: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def well(cls, radius=1.0):
        if radius <= 0:
            raise ValidationError(f"well radius must be positive, got {radius}")
        return cls(family="well", radius=float(radius))

    @classmethod
    def from_table(cls, r_nodes, values):
        r = np.asarray(r_nodes, dtype=float)
        v = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValidationError("potential table needs matching 1d arrays, len >= 2")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValidationError("potential r nodes must start at 0 and increase")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("potential values must be finite and >= 0")
        if np.any(np.diff(v) > _MONOTONE_RTOL * max(v[0], 1e-300)):
            raise ValidationError("potential profile must be non-increasing in r")
        return cls(family="custom-table", radius=float(r[-1]), r_nodes=r, values=v)

    def value_radial(self, r):
        """Depth at radius r; r may be a scalar or an array. Zero beyond support."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValidationError("radius must be >= 0")
        if self.family == "well":
            return np.where(r <= self.radius, 1.0, 0.0)
        out = np.interp(r, self.r_nodes, self.values, right=0.0)
        return out


def eval_V(potential: ExternalPotential, x):
    """Potential depth at a point (or batch of points) x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValidationError("eval_V: non-finite coordinates")
    r = np.sqrt(np.sum(x * x, axis=1))
    out = potential.value_radial(r)
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# pair kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairKernel:
    """Attractive pair interaction weight W(r, t) >= 0.

    t_min is a regularization floor applied to the time argument before
    evaluation; it matters only for families that are expensive or singular
    near t = 0 and defaults to 0 (no clamping).
    """

    family: str
    d: int = 1
    width: float = 1.0
    t_min: float = 0.0
    r_nodes: Optional[np.ndarray] = field(default=None, repr=False)
    t_nodes: Optional[np.ndarray] = field(default=None, repr=False)
    table: Optional[np.ndarray] = field(default=None, repr=False)
    quad_nodes: int = 1200

    @classmethod
    def gaussian_omega1(cls, d=1, width=1.0, t_min=0.0):
        if d < 1 or width <= 0:
            raise ValidationError("gaussian-omega1 needs d >= 1 and width > 0")
        return cls(family="gaussian-omega1", d=int(d), width=float(width), t_min=float(t_min))

    @classmethod
    def nelson3d(cls, gamma_width=1.0, t_min=0.0, quad_nodes=1200):
        if gamma_width <= 0:
            raise ValidationError("nelson3d cutoff width must be positive")
        return cls(family="nelson3d", d=3, width=float(gamma_width),
                   t_min=float(t_min), quad_nodes=int(quad_nodes))

    @classmethod
    def custom(cls, r_nodes, t_nodes, table, d=1, t_min=0.0):
        r = np.asarray(r_nodes, dtype=float)
        t = np.asarray(t_nodes, dtype=float)
        v = np.asarray(table, dtype=float)
        if v.shape != (t.size, r.size):
            raise ValidationError("custom kernel table must have shape (n_t, n_r)")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValidationError("custom kernel values must be finite and >= 0")
        return cls(family="custom-grid", d=int(d), r_nodes=r, t_nodes=t,
                   table=v, t_min=float(t_min))


def _nelson_quad_rule(width, n):
    # Gauss-Legendre on [0, k_max]; the integrand carries exp(-w^2 k^2) so
    # k_max = 10/w truncates below 1e-43 relative.
    k_max = 10.0 / width
    x, w = leggauss(n)
    k = 0.5 * k_max * (x + 1.0)
    wk = 0.5 * k_max * w
    return k, wk


def _eval_nelson3d(kernel: PairKernel, r, t):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    w = kernel.width
    vals = None
    prev = None
    for n in (kernel.quad_nodes // 2, kernel.quad_nodes):
        k, wk = _nelson_quad_rule(w, n)
        f = np.pi * w**6 * k**2 * np.exp(-(w * k) ** 2) * np.exp(-t * k)
        # sinc(k r), vectorized over r
        arg = np.outer(r, k)
        vals = np.sinc(arg / np.pi) @ (f * wk)
        if prev is not None:
            resid = float(np.max(np.abs(vals - prev)))
            scale = max(float(np.max(np.abs(vals))), 1e-30)
            if resid > 1e-8 * scale:
                raise NumericError(
                    f"nelson3d quadrature did not converge (residual {resid:.3e})",
                    residual=resid)
        prev = vals
    return vals


def eval_W(kernel: PairKernel, r, t):
    """Kernel value W(r, t); r scalar or 1d array, t scalar >= 0."""
    t = float(t)
    if t < 0:
        raise ValidationError(f"eval_W: time separation must be >= 0, got {t}")
    t = max(t, kernel.t_min)
    scalar = np.isscalar(r) or np.asarray(r).ndim == 0
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0) or not np.all(np.isfinite(r_arr)):
        raise ValidationError("eval_W: radius must be finite and >= 0")

    if kernel.family == "gaussian-omega1":
        c = kernel.width
        amp = (np.pi * c * c) ** (kernel.d / 2.0) / 4.0
        out = amp * np.exp(-t) * np.exp(-r_arr**2 / (4.0 * c * c))
    elif kernel.family == "nelson3d":
        out = _eval_nelson3d(kernel, r_arr, t)
    elif kernel.family == "custom-grid":
        tq = min(max(t, kernel.t_nodes[0]), kernel.t_nodes[-1])
        it = int(np.searchsorted(kernel.t_nodes, tq, side="right") - 1)
        it = min(it, kernel.t_nodes.size - 2)
        ft = (tq - kernel.t_nodes[it]) / (kernel.t_nodes[it + 1] - kernel.t_nodes[it])
        row = (1 - ft) * kernel.table[it] + ft * kernel.table[it + 1]
        out = np.interp(r_arr, kernel.r_nodes, row, right=0.0)
    else:
        raise ValidationError(f"unknown kernel family {kernel.family!r}")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# cached evaluation grid
# ---------------------------------------------------------------------------

class KernelGrid:
    """Immutable bilinear-interpolation table of W on a uniform (r, t) grid.

    Queries beyond r_max or t_max return the declared far-field value 0.
    """

    def __init__(self, kernel, r_max, t_max, n_r, n_t):
        if n_r < 2 or n_t < 2:
            raise ValidationError("kernel grid needs n_r >= 2 and n_t >= 2")
        if r_max <= 0 or t_max <= 0:
            raise ValidationError("kernel grid needs positive extents")
        self.kernel = kernel
        self.r_nodes = np.linspace(0.0, r_max, n_r)
        self.t_nodes = np.linspace(0.0, t_max, n_t)
        vals = np.empty((n_t, n_r))
        for i, t in enumerate(self.t_nodes):
            vals[i] = eval_W(kernel, self.r_nodes, t)
        vals.setflags(write=False)
        self.values = vals
        self.r_max = float(r_max)
        self.t_max = float(t_max)

    @property
    def dr(self):
        return self.r_nodes[1] - self.r_nodes[0]

    def row_at(self, t):
        """Kernel values at fixed time lag over the full r axis (0 beyond t_max)."""
        if t < 0:
            raise ValidationError("row_at: t must be >= 0")
        if t > self.t_max:
            return np.zeros_like(self.r_nodes)
        it = min(int(t / (self.t_nodes[1] - self.t_nodes[0])), self.t_nodes.size - 2)
        ft = (t - self.t_nodes[it]) / (self.t_nodes[it + 1] - self.t_nodes[it])
        return (1 - ft) * self.values[it] + ft * self.values[it + 1]

    def query(self, r, t):
        """Bilinear lookup; scalar or array r with scalar t."""
        scalar = np.isscalar(r) or np.asarray(r).ndim == 0
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        row = self.row_at(float(t))
        out = np.interp(r_arr, self.r_nodes, row, right=0.0)
        return float(out[0]) if scalar else out


def build_grid(kernel, r_max, t_max, n_r=512, n_t=256):
    return KernelGrid(kernel, r_max, t_max, n_r, n_t)


# ---------------------------------------------------------------------------
# assumption validation
# ---------------------------------------------------------------------------

@dataclass
class AssumptionReport:
    radial_monotone_ok: bool
    radial_worst_violation: float
    time_decay_estimate: float
    quadratic_envelope_ok: bool
    quadratic_worst_violation: float
    xi: float
    envelope_radius: float
    envelope_time: float


def _worst_increase(rows):
    # rows: (n_t, n_r) values sampled on an increasing r grid; returns the
    # largest relative upward step along r over all time slices
    worst = 0.0
    for row in rows:
        scale = max(abs(row[0]), 1e-300)
        inc = np.max(np.diff(row)) / scale
        worst = max(worst, float(inc))
    return worst


def validate_assumptions(kernel, xi, envelope_radius, envelope_time,
                         r_max=None, t_max=40.0, n_r=400, n_t=200, seed=0):
    """Grid checks of the standing kernel assumptions.

    Checks that r -> W(r, t) is non-increasing for every sampled t, that
    r -> W(r, t) + r^2/xi is non-increasing on [0, envelope_radius] for
    t in [0, envelope_time], and estimates the long-time interaction spill

        C = int_0^T dt int_T^{t_max} ds W(|x_t - x_s|, s - t)

    along sampled Brownian paths (reported as the max over a few seeds and
    split points; an estimate, not a bound).
    """
    if xi <= 0 or envelope_radius <= 0 or envelope_time <= 0:
        raise ValidationError("xi, envelope_radius and envelope_time must be positive")
    if r_max is None:
        r_max = max(4.0 * kernel.width, 2.0 * envelope_radius)

    r = np.linspace(0.0, r_max, n_r)
    ts = np.linspace(0.0, t_max, n_t)
    rows = np.array([eval_W(kernel, r, t) for t in ts])
    worst_r = _worst_increase(rows)

    r_env = np.linspace(0.0, envelope_radius, n_r)
    t_env = np.linspace(0.0, envelope_time, max(8, n_t // 4))
    env_rows = np.array([eval_W(kernel, r_env, t) + r_env**2 / xi for t in t_env])
    worst_env = _worst_increase(env_rows)

    # long-time spill along Brownian paths, summed lag by lag so each kernel
    # evaluation is vectorized over pair distances at a fixed time separation
    rng = np.random.default_rng(seed)
    n_path = 192
    dt = t_max / n_path
    spill = 0.0
    for _ in range(3):
        steps = rng.normal(scale=np.sqrt(dt), size=(n_path, kernel.d))
        x = np.vstack([np.zeros(kernel.d), np.cumsum(steps, axis=0)])
        for frac in (0.25, 0.5):
            split = int(n_path * frac)
            acc = 0.0
            for k in range(1, n_path + 1):
                i_lo, i_hi = max(0, split - k), min(split - 1, n_path - k)
                if i_lo > i_hi:
                    continue
                idx = np.arange(i_lo, i_hi + 1)
                dif = x[idx + k] - x[idx]
                rr = np.sqrt(np.sum(dif * dif, axis=1))
                acc += float(np.sum(eval_W(kernel, rr, k * dt))) * dt * dt
            spill = max(spill, acc)

    return AssumptionReport(
        radial_monotone_ok=worst_r <= _MONOTONE_RTOL,
        radial_worst_violation=worst_r,
        time_decay_estimate=spill,
        quadratic_envelope_ok=worst_env <= _MONOTONE_RTOL,
        quadratic_worst_violation=worst_env,
        xi=float(xi),
        envelope_radius=float(envelope_radius),
        envelope_time=float(envelope_time),
    )
