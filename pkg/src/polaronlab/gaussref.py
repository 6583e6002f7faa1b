"""Exact sampling of the block-penalized Gaussian path measure.

The measure lives on pinned discrete paths (x_0 = 0, free right end) and
multiplies the Brownian increment density by a quadratic block penalty: the
time axis splits into consecutive blocks of length l (grid endpoints shared
between neighbours), and every within-block pair of grid points contributes
beta * dt^2 * |x_i - x_j|^2 to the exponent.

Coordinates are independent, so one symmetric positive-definite precision
matrix of order N covers all of them:

    P = (Brownian tridiagonal) / dt + 2 beta dt^2 * sum_blocks (n_b I - ones)

restricted to the non-initial grid points.  P is banded with bandwidth equal
to the points-per-block count, which keeps factorization and solves cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

from .errors import NumericError, ValidationError
from .pathspace import DiscretePath, _as_rng


@dataclass(frozen=True)
class BlockGaussianSpec:
    beta: float
    block_len: float
    horizon: float
    dt: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if self.dt <= 0 or self.block_len <= 0 or self.horizon <= 0:
            raise ValidationError("dt, block_len and horizon must be positive")
        m = self.block_len / self.dt
        nb = self.horizon / self.block_len
        if abs(m - round(m)) > 1e-9 or abs(nb - round(nb)) > 1e-9:
            raise ValidationError("block_len must be a multiple of dt and divide horizon")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def steps_per_block(self):
        return int(round(self.block_len / self.dt))

    @property
    def n_blocks(self):
        return int(round(self.horizon / self.block_len))


class PrecisionFactor:
    """Banded precision matrix and its Cholesky factor (upper banded form)."""

    def __init__(self, spec, ab):
        self.spec = spec
        self.ab = ab            # scipy upper-banded storage, shape (bw+1, N)
        self.bandwidth = ab.shape[0] - 1
        self.n = ab.shape[1]
        try:
            self.chol = cholesky_banded(ab)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"precision matrix not positive definite: {exc}")

    def solve(self, rhs):
        """P^{-1} rhs via the banded factor."""
        return cho_solve_banded((self.chol, False), rhs)

    def covariance_entry(self, i, j):
        """(P^{-1})_{ij} for matrix row indices (0-based on non-initial points)."""
        e = np.zeros(self.n)
        e[j] = 1.0
        return float(self.solve(e)[i])

    def dense(self):
        """Dense reconstruction of P, for small-N verification only."""
        p = np.zeros((self.n, self.n))
        bw = self.bandwidth
        for j in range(self.n):
            for off in range(0, min(bw, j) + 1):
                i = j - off
                p[i, j] = self.ab[bw - off, j]
                p[j, i] = p[i, j]
        return p

    def factor_residual(self):
        """Relative reconstruction error |U^T U - P| / |P| (dense, small N)."""
        bw = self.bandwidth
        u = np.zeros((self.n, self.n))
        for j in range(self.n):
            for off in range(0, min(bw, j) + 1):
                u[j - off, j] = self.chol[bw - off, j]
        p = self.dense()
        return float(np.linalg.norm(u.T @ u - p) / np.linalg.norm(p))


def penalty_matrix(spec):
    """Dense block penalty on the full grid 0..N: 2 beta dt^2 sum_b (n_b I - ones)."""
    n_full = spec.n_steps + 1
    m = spec.steps_per_block
    n_b = m + 1
    c = 2.0 * spec.beta * spec.dt**2
    q = np.zeros((n_full, n_full))
    for b in range(spec.n_blocks):
        sl = slice(b * m, b * m + n_b)
        q[sl, sl] += c * (n_b * np.eye(n_b) - np.ones((n_b, n_b)))
    return q


def build_precision(spec) -> PrecisionFactor:
    n = spec.n_steps
    m = spec.steps_per_block
    n_b = m + 1
    bw = m
    ab = np.zeros((bw + 1, n))
    # Brownian part on variables x_1..x_N
    diag = np.full(n, 2.0 / spec.dt)
    diag[-1] = 1.0 / spec.dt
    ab[bw, :] = diag
    if bw >= 1 and n >= 2:
        ab[bw - 1, 1:] = -1.0 / spec.dt
    # block penalty; grid index g maps to variable g-1, g = 0 is pinned at 0
    c = 2.0 * spec.beta * spec.dt**2
    if c > 0:
        for b in range(spec.n_blocks):
            g0 = b * m
            gs = np.arange(max(g0, 1), g0 + n_b)
            ab[bw, gs - 1] += c * (n_b - 1)
            for off in range(1, n_b):
                lo = np.arange(max(g0, 1), g0 + n_b - off)
                if lo.size:
                    ab[bw - off, lo - 1 + off] += -c
    return PrecisionFactor(spec, ab)


def sample_exact(factor, d, seed, n_paths=1):
    """Exact draws: solve U x = z with z standard normal, U the upper factor.

    Returns a DiscretePath for n_paths=1, else a list of paths.
    """
    rng = _as_rng(seed)
    spec = factor.spec
    bw = factor.bandwidth
    out = []
    for _ in range(n_paths):
        z = rng.standard_normal(size=(factor.n, d))
        x = solve_banded((0, bw), factor.chol, z)
        pts = np.vstack([np.zeros(d), x])
        out.append(DiscretePath(d=d, dt=spec.dt, points=pts))
    return out[0] if n_paths == 1 else out


def block_variance(spec_or_factor, which="first"):
    """Per-coordinate variance of the displacement across one block.

    which="first" uses x_l - x_0 (exactly Var(x_l) since x_0 is pinned);
    which="middle" takes the same displacement across a central block.
    At beta=0 the first-block value is the Brownian answer, block_len.
    """
    factor = spec_or_factor if isinstance(spec_or_factor, PrecisionFactor) \
        else build_precision(spec_or_factor)
    spec = factor.spec
    m = spec.steps_per_block
    if which == "first":
        return factor.covariance_entry(m - 1, m - 1)
    if which == "middle":
        b = spec.n_blocks // 2
        if b == 0:
            return factor.covariance_entry(m - 1, m - 1)
        g1, g2 = b * m, (b + 1) * m
        e = np.zeros(factor.n)
        e[g2 - 1] = 1.0
        e[g1 - 1] = -1.0
        col = factor.solve(e)
        return float(col[g2 - 1] - col[g1 - 1])
    raise ValidationError("which must be 'first' or 'middle'")
