"""Numerical checks for the Gaussian comparison inequalities the estimators
lean on: correlation of symmetric convex events, exponential-tilt reweighting,
endpoint tail bounds, and variance-inflation anticoncentration.

Every check reports both sides, a margin, and an error scale; "holds" flags
account for Monte Carlo confidence so that a genuine violation must clear
4 joint standard errors (exact quadrature instances use a 1e-8 floor).
"""

from __future__ import annotations

import math
import warnings
import zlib
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import integrate
from scipy.stats import chi2, ncx2, norm

from .errors import NumericError, ValidationError
from .pathspace import _as_rng

_PSD_TOL = 1e-10
_EXACT_MARGIN_FLOOR = -1e-8


# ---------------------------------------------------------------------------
# symmetric convex sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Centered axis-aligned box: |x_i| <= half_widths[i]."""
    half_widths: np.ndarray

    def __post_init__(self):
        hw = np.atleast_1d(np.asarray(self.half_widths, dtype=float))
        if np.any(hw <= 0) or not np.all(np.isfinite(hw)):
            raise ValidationError("box half widths must be positive and finite")
        object.__setattr__(self, "half_widths", hw)

    @property
    def dim(self):
        return self.half_widths.size

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.all(np.abs(x) <= self.half_widths[None, :], axis=1)

    def x_extent(self):
        return float(self.half_widths[0])

    def section(self, x):
        """Interval of the second coordinate at first coordinate x (dim 2)."""
        if abs(x) > self.half_widths[0]:
            return None
        h = float(self.half_widths[1])
        return (-h, h)


@dataclass(frozen=True)
class Ellipsoid:
    """Centered ellipsoid: x^T A x <= 1 with A symmetric positive definite."""
    mat: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.mat, dtype=float))
        if a.shape[0] != a.shape[1] or not np.allclose(a, a.T, atol=1e-12):
            raise ValidationError("ellipsoid matrix must be square symmetric")
        if np.min(np.linalg.eigvalsh(a)) <= 0:
            raise ValidationError("ellipsoid matrix must be positive definite")
        object.__setattr__(self, "mat", a)

    @property
    def dim(self):
        return self.mat.shape[0]

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.einsum("ij,jk,ik->i", x, self.mat, x) <= 1.0

    def x_extent(self):
        a = self.mat
        if a.shape[0] == 1:
            return float(1.0 / math.sqrt(a[0, 0]))
        det = a[0, 0] * a[1, 1] - a[0, 1] ** 2
        return float(math.sqrt(a[1, 1] / det))

    def section(self, x):
        a, b, c = self.mat[0, 0], self.mat[0, 1], self.mat[1, 1]
        disc = c - x * x * (a * c - b * b)
        if disc < 0:
            return None
        root = math.sqrt(disc)
        return ((-b * x - root) / c, (-b * x + root) / c)


ConvexSet = Union[Box, Ellipsoid]


@dataclass(frozen=True)
class GaussianInstance:
    cov: np.ndarray
    sets: Sequence[ConvexSet]

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if c.shape[0] != c.shape[1] or not np.allclose(c, c.T, atol=1e-12):
            raise ValidationError("covariance must be square symmetric")
        scale = max(float(np.max(np.abs(c))), 1.0)
        if np.min(np.linalg.eigvalsh(c)) < -_PSD_TOL * scale:
            raise ValidationError("covariance must be PSD within 1e-10")
        if len(self.sets) < 1:
            raise ValidationError("need at least one set")
        for s in self.sets:
            if s.dim != c.shape[0]:
                raise ValidationError("set dimension mismatch")
        object.__setattr__(self, "cov", c)
        object.__setattr__(self, "sets", tuple(self.sets))

    @property
    def dim(self):
        return self.cov.shape[0]


def _cov_sampler(cov):
    """Linear map L with L L^T = cov, tolerant of PSD-singular input."""
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)[None, :]


def gauss_prob_exact(cov, sets):
    """Probability of the intersection under N(0, cov), dim <= 2."""
    val, _ = _gauss_prob_exact_err(cov, sets)
    return val


def _gauss_prob_exact_err(cov, sets):
    """(probability, error bound) of the intersection under N(0, cov).

    Dimension 1 reduces to a normal CDF difference; dimension 2 integrates
    the conditional slice with an adaptive quadrature whose breakpoints sit
    at the set extents (square-root kinks live there).  The reported error
    is quad's own estimate, conservative when roundoff limits refinement.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = cov.shape[0]
    if n > 2:
        raise ValidationError("exact evaluation is limited to dimension <= 2")
    if np.min(np.linalg.eigvalsh(cov)) <= 0:
        raise ValidationError("exact evaluation needs a nonsingular covariance")
    if n == 1:
        sd = math.sqrt(cov[0, 0])
        a = min(s.x_extent() for s in sets)
        return float(2.0 * norm.cdf(a / sd) - 1.0), 1e-15
    s11, s12, s22 = cov[0, 0], cov[0, 1], cov[1, 1]
    sx = math.sqrt(s11)
    cond_sd = math.sqrt(s22 - s12 * s12 / s11)
    slope = s12 / s11
    x_max = min(s.x_extent() for s in sets)

    def integrand(x):
        lo, hi = -math.inf, math.inf
        for s in sets:
            sec = s.section(x)
            if sec is None:
                return 0.0
            lo = max(lo, sec[0])
            hi = min(hi, sec[1])
        if lo >= hi:
            return 0.0
        mu = slope * x
        mass = norm.cdf((hi - mu) / cond_sd) - norm.cdf((lo - mu) / cond_sd)
        return mass * norm.pdf(x / sx) / sx

    breaks = sorted({s.x_extent() for s in sets if s.x_extent() < x_max})
    pts = [-b for b in reversed(breaks)] + breaks
    with warnings.catch_warnings():
        # roundoff chatter near the kink breakpoints; accuracy is checked
        # through abserr below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, abserr = integrate.quad(integrand, -x_max, x_max,
                                     points=pts or None, limit=300,
                                     epsabs=1e-12, epsrel=1e-12)
    if abserr > 1e-6:
        raise NumericError(f"set-probability quadrature error {abserr:.2e}",
                           residual=float(abserr))
    return float(val), float(abserr)


# ---------------------------------------------------------------------------
# correlation of symmetric convex events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    lhs: float
    rhs: float
    margin: float
    error: float
    holds: bool
    method: str


def gci_check(instance: GaussianInstance, m, method="mc",
              n_samples=200000, seed=0, n_batches=40) -> CheckResult:
    """Joint probability of all sets vs the product over a split.

    lhs is the product of the two group probabilities, rhs the probability
    of the full intersection; the correlation inequality says margin =
    rhs - lhs >= 0.  Both sides come from the same draw in MC mode so the
    margin error is estimated directly by batch means.
    """
    k = len(instance.sets)
    if not (1 <= m < k):
        raise ValidationError("split must satisfy 1 <= m < number of sets")
    first, rest = instance.sets[:m], instance.sets[m:]
    if method == "exact2d":
        if instance.dim > 2:
            raise ValidationError("exact2d requires dimension <= 2")
        rhs, e_rhs = _gauss_prob_exact_err(instance.cov, instance.sets)
        p1, e1 = _gauss_prob_exact_err(instance.cov, first)
        p2, e2 = _gauss_prob_exact_err(instance.cov, rest)
        lhs = p1 * p2
        margin = rhs - lhs
        err = e_rhs + e1 * p2 + e2 * p1
        return CheckResult(lhs=lhs, rhs=rhs, margin=margin, error=err,
                           holds=margin >= _EXACT_MARGIN_FLOOR, method=method)
    if method != "mc":
        raise ValidationError("method must be 'exact2d' or 'mc'")
    rng = _as_rng(seed)
    lmap = _cov_sampler(instance.cov)
    x = rng.normal(size=(n_samples, instance.dim)) @ lmap.T
    in_a = np.ones(n_samples, dtype=bool)
    for s in first:
        in_a &= s.contains(x)
    in_b = np.ones(n_samples, dtype=bool)
    for s in rest:
        in_b &= s.contains(x)
    joint = (in_a & in_b).astype(float)
    a = in_a.astype(float)
    b = in_b.astype(float)
    lhs = float(a.mean() * b.mean())
    rhs = float(joint.mean())
    margin = rhs - lhs
    nb = min(n_batches, n_samples // 2)
    size = n_samples // nb
    bm = np.empty(nb)
    for i in range(nb):
        sl = slice(i * size, (i + 1) * size)
        bm[i] = joint[sl].mean() - a[sl].mean() * b[sl].mean()
    se = float(np.std(bm, ddof=1) / np.sqrt(nb))
    return CheckResult(lhs=lhs, rhs=rhs, margin=margin, error=se,
                       holds=margin >= -4.0 * se, method="mc")


# ---------------------------------------------------------------------------
# exponential-tilt reweighting comparison
# ---------------------------------------------------------------------------

def _probe_quasi_concave(bump, dim, rng, n_rays=32, n_radii=24):
    """Check that the bump is non-increasing along rays from the origin."""
    radii = np.linspace(0.0, 6.0, n_radii)
    for _ in range(n_rays):
        u = rng.normal(size=dim)
        u /= np.linalg.norm(u)
        vals = bump(radii[:, None] * u[None, :])
        if np.any(np.diff(vals) > 1e-12):
            return False
    return True


def reweight_gci_check(cov, bump_sets, bump_strength, q_matrix,
                       set_a: Optional[ConvexSet], *, n_samples=200000,
                       seed=0, n_batches=40) -> CheckResult:
    """Tilted-measure comparison mu^(f)(A) >= mu^(-g)(A).

    f(x) = strength * 1(x in every bump set) - (1/2) x^T Q x and
    g(x) = (1/2) x^T Q x, so f + g is a scaled indicator of a convex
    symmetric intersection (quasi-concave by construction, still probed
    numerically) and mu^(-g) is the exactly known Gaussian N(0, inv(inv(cov)
    + Q)).  lhs is estimated by reweighting draws from that Gaussian with
    the bounded factor e^(bump); rhs is exact in dimension <= 2 and uses
    the same draws otherwise.  set_a = None means the whole space.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    dim = cov.shape[0]
    q = np.atleast_2d(np.asarray(q_matrix, dtype=float))
    if q.shape != cov.shape or not np.allclose(q, q.T, atol=1e-12):
        raise ValidationError("Q must be symmetric and match the covariance")
    if np.min(np.linalg.eigvalsh(q)) < -_PSD_TOL:
        raise ValidationError("Q must be PSD")
    if np.min(np.linalg.eigvalsh(cov)) <= 0:
        raise ValidationError("covariance must be positive definite")
    for s in bump_sets:
        if s.dim != dim:
            raise ValidationError("bump set dimension mismatch")
    if set_a is not None and set_a.dim != dim:
        raise ValidationError("target set dimension mismatch")

    def bump(x):
        x = np.atleast_2d(x)
        ind = np.ones(x.shape[0], dtype=bool)
        for s in bump_sets:
            ind &= s.contains(x)
        return bump_strength * ind.astype(float)

    rng = _as_rng(seed)
    if not _probe_quasi_concave(bump, dim, rng):
        raise ValidationError(
            "bump failed the ray quasi-concavity probe; the comparison "
            "inequality's precondition does not hold for this instance")

    tilted_cov = np.linalg.inv(np.linalg.inv(cov) + q)
    lmap = _cov_sampler(tilted_cov)
    x = rng.normal(size=(n_samples, dim)) @ lmap.T
    w = np.exp(bump(x))
    in_a = np.ones(n_samples, dtype=float) if set_a is None \
        else set_a.contains(x).astype(float)
    lhs = float(np.sum(w * in_a) / np.sum(w))
    exact_rhs = set_a is None or dim <= 2
    if set_a is None:
        rhs = 1.0
    elif dim <= 2:
        rhs = gauss_prob_exact(tilted_cov, [set_a])
    else:
        rhs = float(in_a.mean())
    nb = min(n_batches, n_samples // 2)
    size = n_samples // nb
    bm = np.empty(nb)
    for i in range(nb):
        sl = slice(i * size, (i + 1) * size)
        bl = np.sum(w[sl] * in_a[sl]) / np.sum(w[sl])
        br = rhs if exact_rhs else in_a[sl].mean()
        bm[i] = bl - br
    se = float(np.std(bm, ddof=1) / np.sqrt(nb))
    margin = lhs - rhs
    return CheckResult(lhs=lhs, rhs=rhs, margin=margin, error=se,
                       holds=margin >= -4.0 * se,
                       method="exact-rhs" if exact_rhs else "mc")


# ---------------------------------------------------------------------------
# endpoint tail bound and running-sup limit
# ---------------------------------------------------------------------------

def tail_bound_check(d, l, big_r, n_samples=200000, seed=0) -> CheckResult:
    """Empirical P(|x_l| >= R) for a Brownian endpoint vs d*exp(-R^2/(2 d^2 l^2)).

    The comparison bound is meaningful on the diffusive regime l >= 1; for
    smaller l it can drop below the true probability, so suite instances
    stay in that regime while the check itself reports raw numbers for any
    positive inputs.
    """
    if l <= 0 or big_r <= 0:
        raise ValidationError("l and R must be positive")
    rng = _as_rng(seed)
    x = rng.normal(scale=math.sqrt(l), size=(n_samples, d))
    hits = (np.sqrt(np.sum(x * x, axis=1)) >= big_r).astype(float)
    emp = float(hits.mean())
    se = float(np.sqrt(max(emp * (1.0 - emp), 1e-12) / n_samples))
    bound = d * math.exp(-big_r ** 2 / (2.0 * d * d * l * l))
    return CheckResult(lhs=emp, rhs=bound, margin=bound - emp, error=se,
                       holds=emp <= bound + 4.0 * se, method="mc")


def sup_ball_prob(l, big_r, terms=60):
    """P(sup_{t<=l} |B_t| < R) for 1d Brownian motion via the image series."""
    if l <= 0 or big_r <= 0:
        raise ValidationError("l and R must be positive")
    sq = math.sqrt(l)
    total = 0.0
    for k in range(-terms, terms + 1):
        total += (-1.0) ** k * (norm.cdf(((2 * k + 1) * big_r) / sq)
                                - norm.cdf(((2 * k - 1) * big_r) / sq))
    return float(min(max(total, 0.0), 1.0))


@dataclass(frozen=True)
class SupLimitResult:
    l_values: np.ndarray
    probs: np.ndarray
    roots: np.ndarray      # probs ** (1/l)
    increasing: bool


def sup_limit_check(big_r, l_values=(1.0, 0.5, 0.25, 0.125), d=1,
                    n_samples=20000, n_steps=512, seed=0) -> SupLimitResult:
    """P(sup_{t<=l} |x_t| <= R)^(1/l) along a decreasing l sequence.

    The rooted probabilities must increase toward 1 as l shrinks.  Estimated
    on discrete paths; d=1 callers can cross-check against sup_ball_prob.
    """
    ls = np.asarray(l_values, dtype=float)
    if np.any(ls <= 0) or np.any(np.diff(ls) >= 0):
        raise ValidationError("l sequence must be positive and decreasing")
    rng = _as_rng(seed)
    probs = np.empty(ls.size)
    for i, l in enumerate(ls):
        dt = l / n_steps
        steps = rng.normal(scale=math.sqrt(dt), size=(n_samples, n_steps, d))
        pos = np.cumsum(steps, axis=1)
        sup = np.max(np.sqrt(np.sum(pos * pos, axis=2)), axis=1)
        probs[i] = float(np.mean(sup <= big_r))
    roots = probs ** (1.0 / ls)
    return SupLimitResult(l_values=ls, probs=probs, roots=roots,
                          increasing=bool(np.all(np.diff(roots) > 0)))


# ---------------------------------------------------------------------------
# variance-inflation anticoncentration
# ---------------------------------------------------------------------------

def _noncentral_ball_prob(r_sq, d, noncentrality):
    if noncentrality < 1e-14:
        return float(chi2.cdf(r_sq, d))
    return float(ncx2.cdf(r_sq, d, noncentrality))


def variance_inflation_check(d, sigma, z, big_r, method="quadrature",
                             n_samples=200000, seed=0) -> CheckResult:
    """P(|X + z| <= R) vs sqrt(2^d) * P(|sqrt(sigma) X + z| <= R), X ~ N(0, I).

    Both sides reduce to noncentral chi-square CDFs in quadrature mode; MC
    mode reuses one draw for both sides and reports a batch-means error on
    the margin.  sigma must lie in [1, 2].
    """
    if not (1.0 <= sigma <= 2.0):
        raise ValidationError("sigma must lie in [1, 2]")
    if big_r <= 0:
        raise ValidationError("R must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size != d:
        raise ValidationError("shift dimension mismatch")
    z_sq = float(np.sum(z * z))
    factor = math.sqrt(2.0 ** d)
    if method == "quadrature":
        lhs = _noncentral_ball_prob(big_r ** 2, d, z_sq)
        rhs = factor * _noncentral_ball_prob(big_r ** 2 / sigma, d, z_sq / sigma)
        return CheckResult(lhs=lhs, rhs=rhs, margin=rhs - lhs, error=1e-12,
                           holds=lhs <= rhs + 1e-12, method=method)
    if method != "mc":
        raise ValidationError("method must be 'quadrature' or 'mc'")
    rng = _as_rng(seed)
    x = rng.normal(size=(n_samples, d))
    left = (np.sqrt(np.sum((x + z) ** 2, axis=1)) <= big_r).astype(float)
    right = factor * (np.sqrt(np.sum((math.sqrt(sigma) * x + z) ** 2, axis=1))
                      <= big_r).astype(float)
    diff = right - left
    nb = 40
    bm = diff[: (n_samples // nb) * nb].reshape(nb, -1).mean(axis=1)
    se = float(np.std(bm, ddof=1) / np.sqrt(nb))
    margin = float(diff.mean())
    return CheckResult(lhs=float(left.mean()), rhs=float(right.mean()),
                       margin=margin, error=se,
                       holds=margin >= -4.0 * se, method="mc")


# ---------------------------------------------------------------------------
# randomized suites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceRow:
    suite: str
    index: int
    dimension: int
    method: str
    lhs: float
    rhs: float
    margin: float
    error: float
    holds: bool


@dataclass
class SuiteReport:
    name: str
    rows: List[InstanceRow] = field(default_factory=list)

    @property
    def n_flagged(self):
        return sum(0 if r.holds else 1 for r in self.rows)

    @property
    def all_hold(self):
        return self.n_flagged == 0


def _suite_seed(master, label, index):
    tag = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence([int(master), int(tag), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] % np.uint64(2 ** 63))


def _random_spd(rng, n, lo=0.4, hi=2.5):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigs = rng.uniform(lo, hi, size=n)
    return q @ np.diag(eigs) @ q.T


def _random_set(rng, n) -> ConvexSet:
    if rng.uniform() < 0.5:
        return Box(half_widths=rng.uniform(0.4, 2.5, size=n))
    return Ellipsoid(mat=_random_spd(rng, n, 0.15, 2.0))


def run_gci_suite(n_instances=200, seed=0, n_samples=100000) -> SuiteReport:
    report = SuiteReport(name="gci")
    for i in range(n_instances):
        rng = _as_rng(_suite_seed(seed, "gci", i))
        n = int(rng.choice([1, 2, 2, 3, 4]))
        cov = _random_spd(rng, n)
        k = int(rng.integers(2, 5))
        sets = [_random_set(rng, n) for _ in range(k)]
        m = int(rng.integers(1, k))
        inst = GaussianInstance(cov=cov, sets=sets)
        method = "exact2d" if (n <= 2 and rng.uniform() < 0.5) else "mc"
        res = gci_check(inst, m, method=method, n_samples=n_samples,
                        seed=_suite_seed(seed, "gci-draw", i))
        report.rows.append(InstanceRow(
            suite="gci", index=i, dimension=n, method=res.method,
            lhs=res.lhs, rhs=res.rhs, margin=res.margin, error=res.error,
            holds=res.holds))
    return report


def run_reweight_suite(n_instances=50, seed=0, n_samples=100000) -> SuiteReport:
    report = SuiteReport(name="reweight")
    for i in range(n_instances):
        rng = _as_rng(_suite_seed(seed, "reweight", i))
        n = int(rng.choice([1, 2, 2, 3]))
        cov = _random_spd(rng, n)
        n_bump = int(rng.integers(1, 3))
        bumps = [Box(half_widths=rng.uniform(0.4, 2.0, size=n))
                 for _ in range(n_bump)]
        strength = float(rng.uniform(0.2, 2.0))
        q = _random_spd(rng, n, 0.0, 1.5) if rng.uniform() < 0.8 \
            else np.zeros((n, n))
        target = _random_set(rng, n)
        res = reweight_gci_check(cov, bumps, strength, q, target,
                                 n_samples=n_samples,
                                 seed=_suite_seed(seed, "reweight-draw", i))
        report.rows.append(InstanceRow(
            suite="reweight", index=i, dimension=n, method=res.method,
            lhs=res.lhs, rhs=res.rhs, margin=res.margin, error=res.error,
            holds=res.holds))
    return report


def run_tail_suite(n_instances=20, seed=0, n_samples=200000) -> SuiteReport:
    # instances live in the diffusive regime l >= 1 where the bound is valid
    report = SuiteReport(name="tails")
    for i in range(n_instances):
        rng = _as_rng(_suite_seed(seed, "tails", i))
        d = int(rng.integers(1, 4))
        l = float(rng.uniform(1.0, 4.0))
        big_r = float(rng.uniform(0.5, 3.0) * d * math.sqrt(l))
        res = tail_bound_check(d, l, big_r, n_samples=n_samples,
                               seed=_suite_seed(seed, "tails-draw", i))
        report.rows.append(InstanceRow(
            suite="tails", index=i, dimension=d, method=res.method,
            lhs=res.lhs, rhs=res.rhs, margin=res.margin, error=res.error,
            holds=res.holds))
    return report


def run_inflation_suite(n_instances=50, seed=0) -> SuiteReport:
    report = SuiteReport(name="inflation")
    for i in range(n_instances):
        rng = _as_rng(_suite_seed(seed, "inflation", i))
        d = int(rng.integers(1, 5))
        sigma = float(rng.uniform(1.0, 2.0))
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        z = direction * rng.uniform(0.0, 3.0)
        big_r = float(rng.uniform(0.2, 3.0))
        res = variance_inflation_check(d, sigma, z, big_r, method="quadrature")
        report.rows.append(InstanceRow(
            suite="inflation", index=i, dimension=d, method=res.method,
            lhs=res.lhs, rhs=res.rhs, margin=res.margin, error=res.error,
            holds=res.holds))
    return report


def run_all_suites(seed=0, gci_instances=200, reweight_instances=50,
                   tail_instances=20, inflation_instances=50,
                   n_samples=100000) -> List[SuiteReport]:
    return [
        run_gci_suite(gci_instances, seed=seed, n_samples=n_samples),
        run_reweight_suite(reweight_instances, seed=seed,
                           n_samples=n_samples),
        run_tail_suite(tail_instances, seed=seed,
                       n_samples=max(n_samples, 100000)),
        run_inflation_suite(inflation_instances, seed=seed),
    ]
