"""Chain-output post-processing: localization diagnostics, free-energy rate
by thermodynamic integration, and the semigroup overlap ratio.

All estimators consume immutable chain output and return values with
autocorrelation-aware error bars (batch means over the retained series).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .pathspace import _as_rng, trapezoid_weights
from .sampler import ChainConfig, ChainOutput, ModelSpec, mcmc_run
from . import spectral


def batch_means(series, n_batches=None):
    """Mean, batch-means standard error, and effective sample size.

    The series is split into contiguous batches (default about sqrt(n));
    the spread of batch means absorbs autocorrelation.  n_effective is the
    i.i.d. sample count that would give the same standard error.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 4:
        raise ValidationError("batch means needs at least 4 samples")
    if n_batches is None:
        n_batches = max(5, int(np.sqrt(n)))
    n_batches = min(n_batches, n // 2)
    m = n // n_batches
    trimmed = x[: m * n_batches].reshape(n_batches, m)
    bm = trimmed.mean(axis=1)
    mean = float(trimmed.mean())
    se = float(np.std(bm, ddof=1) / np.sqrt(n_batches))
    var = float(np.var(x, ddof=1))
    if se > 0 and var > 0:
        n_eff = min(float(n), var / (se * se))
    else:
        n_eff = float(n)
    return mean, se, n_eff


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    std_error: float
    n_effective: float
    n_samples: int

    @property
    def low_sample_warning(self):
        return self.n_effective < 10


def _from_series(series):
    mean, se, n_eff = batch_means(series)
    return EstimateWithError(value=mean, std_error=se,
                             n_effective=n_eff, n_samples=len(series))


def occupation_fraction(output: ChainOutput, k_radius=None) -> EstimateWithError:
    """Mean fraction of path time spent inside the centered diagnostic ball.

    With the default radius the per-sweep series recorded by the sampler is
    used directly; a different radius requires retained paths.
    """
    model = output.model
    if k_radius is None or k_radius == model.k_radius:
        return _from_series(output.occupation)
    if output.paths is None:
        raise ValidationError("custom k_radius needs keep_paths=True output")
    quad = trapezoid_weights(model.n_steps)
    vals = []
    for p in output.paths:
        r = np.sqrt(np.sum(p.points * p.points, axis=1))
        vals.append(np.sum(quad * (r <= k_radius)) * model.dt / model.horizon)
    return _from_series(np.array(vals))


def midpoint_mass(output: ChainOutput, k_radius=None) -> EstimateWithError:
    """Probability that the path midpoint lies in the centered ball."""
    radius = output.model.k_radius if k_radius is None else float(k_radius)
    if radius <= 0:
        raise ValidationError("k_radius must be positive")
    r = np.sqrt(np.sum(output.midpoints ** 2, axis=1))
    return _from_series((r <= radius).astype(float))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    std_error: np.ndarray
    kind: str            # "signed" for 1d, "radial" otherwise
    n_samples: int


def endpoint_histogram(output: ChainOutput, bins=24, limit=None) -> Histogram:
    """Normalized density histogram of the retained path midpoints.

    d=1 uses signed bins on the coordinate itself (symmetry is checkable);
    d>=2 bins the radius.  Density integrates to one over the bin range;
    per-bin errors come from batch means on the bin indicators.
    """
    if bins < 2:
        raise ValidationError("need at least 2 bins")
    mids = output.midpoints
    if mids.size == 0:
        raise ValidationError("chain output has no retained samples")
    d = output.model.d
    if d == 1:
        x = mids[:, 0]
        hi = float(np.max(np.abs(x))) * 1.05 if limit is None else float(limit)
        edges = np.linspace(-hi, hi, bins + 1)
    else:
        x = np.sqrt(np.sum(mids * mids, axis=1))
        hi = float(np.max(x)) * 1.05 if limit is None else float(limit)
        edges = np.linspace(0.0, hi, bins + 1)
    width = edges[1] - edges[0]
    inside = (x >= edges[0]) & (x <= edges[-1])
    n_in = int(np.sum(inside))
    if n_in == 0:
        raise ValidationError("no samples fall inside the histogram range")
    density = np.empty(bins)
    err = np.empty(bins)
    for b in range(bins):
        if b < bins - 1:
            ind = (x >= edges[b]) & (x < edges[b + 1])
        else:
            ind = (x >= edges[b]) & (x <= edges[b + 1])
        ind = ind.astype(float) * (len(x) / n_in)
        mean, se, _ = batch_means(ind)
        density[b] = mean / width
        err[b] = se / width
    return Histogram(edges=edges, density=density, std_error=err,
                     kind="signed" if d == 1 else "radial", n_samples=len(x))


# ---------------------------------------------------------------------------
# free energy by thermodynamic integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeEnergyCurve:
    deltas: np.ndarray
    values: np.ndarray           # f at each grid point
    errors: np.ndarray
    integrand_means: np.ndarray  # chain estimates of the potential part
    integrand_errors: np.ndarray
    alpha: float
    horizon: float
    convexity_flags: np.ndarray  # integrand decrease beyond 3 joint s.e.


def _chain_seed(master, index):
    ss = np.random.SeedSequence([int(master), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] % np.uint64(2 ** 63))


def free_energy_rate(model: ModelSpec, deltas, config: ChainConfig,
                     runner=mcmc_run) -> FreeEnergyCurve:
    """Growth rate of the tilted partition function along a coupling grid.

    f(delta) = (1/T) * integral_0^delta E[potential part] d(delta'), with the
    expectation taken under the chain at each grid point and the integral done
    by the trapezoid rule.  Errors propagate through the trapezoid weights.
    The grid must start at 0, where f vanishes identically.
    """
    dg = np.asarray(deltas, dtype=float)
    if dg.size < 1 or dg[0] != 0.0 or np.any(np.diff(dg) <= 0):
        raise ValidationError("delta grid must start at 0 and increase")
    if model.potential is None:
        raise ValidationError("free energy integration requires a potential")
    means = np.empty(dg.size)
    errs = np.empty(dg.size)
    for k, dk in enumerate(dg):
        out = runner(replace(model, delta=float(dk)),
                     replace(config, seed=_chain_seed(config.seed, k)))
        mean, se, _ = batch_means(out.ret_v)
        means[k] = mean
        errs[k] = se
    # composite trapezoid coefficients for the cumulative integral
    values = np.zeros(dg.size)
    errors = np.zeros(dg.size)
    for k in range(1, dg.size):
        coef = np.zeros(k + 1)
        gaps = np.diff(dg[: k + 1])
        coef[:-1] += 0.5 * gaps
        coef[1:] += 0.5 * gaps
        values[k] = float(np.dot(coef, means[: k + 1])) / model.horizon
        errors[k] = float(np.sqrt(np.sum((coef * errs[: k + 1]) ** 2))) \
            / model.horizon
    joint = 3.0 * np.sqrt(errs[1:] ** 2 + errs[:-1] ** 2)
    flags = np.concatenate([[False], np.diff(means) < -joint])
    return FreeEnergyCurve(deltas=dg, values=values, errors=errors,
                           integrand_means=means, integrand_errors=errs,
                           alpha=model.alpha, horizon=model.horizon,
                           convexity_flags=flags)


# ---------------------------------------------------------------------------
# semigroup overlap ratio
# ---------------------------------------------------------------------------

def ball_volume(d, radius):
    return math.pi ** (d / 2.0) * radius ** d / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class GammaCurve:
    t_grid: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    slope: float
    slope_error: float
    signal: bool
    engine: str
    psi_norm: float


def _weighted_trend(t, vals, errs, window_frac=0.5):
    n = len(t)
    lo = max(0, int(np.floor(n * (1.0 - window_frac))))
    x = np.asarray(t[lo:], dtype=float)
    y = np.log(vals[lo:])
    sig = errs[lo:] / vals[lo:]
    if np.all(sig == 0):
        return spectral.trend_slope(t, vals, window_frac), 0.0
    w = 1.0 / np.maximum(sig, 1e-12) ** 2
    sw = np.sum(w)
    xb = np.sum(w * x) / sw
    yb = np.sum(w * y) / sw
    sxx = np.sum(w * (x - xb) ** 2)
    slope = float(np.sum(w * (x - xb) * (y - yb)) / sxx)
    slope_se = float(np.sqrt(1.0 / sxx))
    return slope, slope_se


def _sample_in_ball(rng, n, d, radius):
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return u * r


def _fk_overlap(d, delta, potential, psi_radius, duration, n_samples, rng,
                dt_max, chunk=8192):
    """Feynman-Kac estimate of the ball-indicator overlap at one duration.

    Free paths are launched uniformly from the ball and weighted by the
    indicator at the far end times the exponential of the accumulated
    potential integral, which is the bridge importance-sampling identity
    with the transition density cancelled.
    Returns (estimate, standard_error).
    """
    n_steps = max(8, int(np.ceil(duration / dt_max)))
    dt = duration / n_steps
    quad = trapezoid_weights(n_steps)
    vol = ball_volume(d, psi_radius)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        x0 = _sample_in_ball(rng, m, d, psi_radius)
        steps = rng.normal(scale=np.sqrt(dt), size=(m, n_steps, d))
        pos = np.concatenate([x0[:, None, :],
                              x0[:, None, :] + np.cumsum(steps, axis=1)], axis=1)
        r = np.sqrt(np.sum(pos * pos, axis=2))
        w = np.zeros(m)
        ok = r[:, -1] <= psi_radius
        if np.any(ok):
            if delta > 0 and potential is not None:
                v = potential.value_radial(r[ok])
                w[ok] = np.exp(delta * (v @ quad) * dt)
            else:
                w[ok] = 1.0
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return vol * mean, vol * np.sqrt(var / n_samples)


def gamma_ratio(d, delta, potential, psi_radius, t_grid,
                engine="spectral", *, alpha=0.0, grid=None,
                n_samples=40000, dt_max=1.0 / 32.0, seed=0,
                r_max=None, n_nodes=1200, threshold=-0.02) -> GammaCurve:
    """Overlap ratio (psi, e^{-tH} psi) / (psi, e^{-2tH} psi)^(1/2).

    psi is the indicator of the centered ball of radius psi_radius.  The
    spectral engine evolves once per grid point with Crank-Nicolson; the
    monte-carlo engine uses the path-average identity and reports sampling
    errors.  Both engines act on the particle Hamiltonian alone, so alpha
    must be 0.  A trailing-window slope of log gamma classifies the curve:
    slope above the threshold reads as a bound-state signal.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size < 4 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValidationError("t_grid must be positive, increasing, length >= 4")
    if psi_radius <= 0:
        raise ValidationError("psi_radius must be positive")
    if alpha != 0.0:
        raise ValidationError("overlap-ratio engines handle alpha = 0 only")
    psi_norm = math.sqrt(ball_volume(d, psi_radius))
    if engine == "spectral":
        if grid is None:
            span = r_max if r_max is not None else \
                max(8.0 * psi_radius, 10.0 * math.sqrt(2.0 * t[-1]), 16.0)
            grid = spectral.RadialGrid(r_max=span, n=n_nodes, d=d)
        vals = spectral.gamma_curve(potential, delta, psi_radius, t, grid)
        errs = np.zeros_like(vals)
        slope = spectral.trend_slope(t, vals)
        slope_se = 0.0
    elif engine == "monte-carlo":
        rng = _as_rng(seed)
        vals = np.empty(t.size)
        errs = np.empty(t.size)
        for i, ti in enumerate(t):
            num, num_se = _fk_overlap(d, delta, potential, psi_radius, ti,
                                      n_samples, rng, dt_max)
            den, den_se = _fk_overlap(d, delta, potential, psi_radius, 2 * ti,
                                      n_samples, rng, dt_max)
            if den <= 0 or den_se >= den:
                raise ValidationError(
                    "insufficient signal: denominator consistent with zero "
                    f"at t={ti}")
            g = num / math.sqrt(den)
            rel = math.sqrt((num_se / num) ** 2 + 0.25 * (den_se / den) ** 2) \
                if num > 0 else float("inf")
            vals[i] = g
            errs[i] = g * rel
        slope, slope_se = _weighted_trend(t, vals, errs)
    else:
        raise ValidationError("engine must be 'spectral' or 'monte-carlo'")
    return GammaCurve(t_grid=t, values=vals, errors=errs, slope=slope,
                      slope_error=slope_se,
                      signal=spectral.classify_trend(slope, threshold),
                      engine=engine, psi_norm=psi_norm)
