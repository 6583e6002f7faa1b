"""Tilted-measure MCMC: move set, invariance, tuning guards, reweighting."""

import math

import numpy as np
import pytest

from polaronlab import (ChainConfig, DiscretePath, ExternalPotential,
                        ModelSpec, PairKernel, TuningError, ValidationError,
                        action, batch_means, build_grid, build_pair_table,
                        mcmc_run, midpoint_mass, partition_estimate,
                        reweight_check)


def free_model(d=1, horizon=8.0, n_steps=64, m_radius=np.inf):
    return ModelSpec(d=d, delta=0.0, alpha=0.0, horizon=horizon,
                     n_steps=n_steps, m_radius=m_radius)


@pytest.fixture(scope="module")
def free_run():
    cfg = ChainConfig(sweeps=24000, burn_in=2000, thinning=6, seed=17)
    return mcmc_run(free_model(), cfg)


class TestValidation:
    def test_model_rejections(self):
        with pytest.raises(ValidationError):
            ModelSpec(d=0, delta=0, alpha=0, horizon=1.0, n_steps=8)
        with pytest.raises(ValidationError):
            ModelSpec(d=1, delta=0, alpha=0, horizon=1.0, n_steps=1)
        with pytest.raises(ValidationError):
            ModelSpec(d=1, delta=0, alpha=0, horizon=-1.0, n_steps=8)
        with pytest.raises(ValidationError):
            ModelSpec(d=1, delta=1.0, alpha=0, horizon=1.0, n_steps=8)
        with pytest.raises(ValidationError):
            ModelSpec(d=1, delta=0, alpha=1.0, horizon=1.0, n_steps=8)
        with pytest.raises(ValidationError):
            ModelSpec(d=1, delta=0, alpha=0, horizon=1.0, n_steps=8,
                      m_radius=0.0)

    def test_config_rejections(self):
        model = free_model(n_steps=16)
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100, burn_in=100))
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100, thinning=0))
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100, block_min=1))
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100, block_min=8, block_max=4))
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100, bridge_weight=-0.5))

    def test_start_point_checks(self):
        model = free_model(d=3, m_radius=1.5)
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100, start=np.zeros(2)))
        with pytest.raises(ValidationError):
            mcmc_run(model, ChainConfig(sweeps=100,
                                        start=np.array([3.0, 0.0, 0.0])))


class TestFreeChain:
    def test_midpoint_variance_is_half_horizon(self, free_run):
        # pinned free path: x_{T/2} ~ N(0, T/2) per coordinate
        sq = free_run.midpoints[:, 0] ** 2
        mean, se, _ = batch_means(sq)
        assert abs(mean - 4.0) <= 5.0 * se

    def test_midpoint_symmetric(self, free_run):
        mean, se, _ = batch_means(free_run.midpoints[:, 0])
        assert abs(mean) <= 4.0 * se

    def test_drift_negligible(self, free_run):
        assert free_run.action_drift <= 1e-10

    def test_retained_count(self, free_run):
        assert free_run.n_retained == (24000 - 2000 + 5) // 6


class TestMoveSet:
    def test_determinism(self):
        cfg = ChainConfig(sweeps=600, burn_in=100, thinning=2, seed=5)
        a = mcmc_run(free_model(n_steps=32), cfg)
        b = mcmc_run(free_model(n_steps=32), cfg)
        np.testing.assert_array_equal(a.ret_v, b.ret_v)
        np.testing.assert_array_equal(a.midpoints, b.midpoints)
        np.testing.assert_array_equal(a.endpoint_radii, b.endpoint_radii)

    def test_endpoint_ball_never_left(self):
        model = free_model(d=3, horizon=4.0, n_steps=32, m_radius=1.5)
        out = mcmc_run(model, ChainConfig(sweeps=2500, burn_in=200,
                                          thinning=2, seed=9))
        assert np.all(out.endpoint_radii <= 1.5 + 1e-12)

    def test_reflection_disabled_off_origin(self):
        model = free_model(d=1, horizon=2.0, n_steps=16)
        cfg = ChainConfig(sweeps=400, burn_in=50, thinning=2, seed=4,
                          reflect_weight=0.3, start=np.array([0.5]))
        out = mcmc_run(model, cfg)
        assert out.acceptance["reflect"]["attempted"] == 0

    def test_reflection_active_at_origin(self):
        model = free_model(d=1, horizon=2.0, n_steps=16)
        cfg = ChainConfig(sweeps=400, burn_in=50, thinning=2, seed=4,
                          reflect_weight=0.3)
        out = mcmc_run(model, cfg)
        assert out.acceptance["reflect"]["attempted"] > 0
        assert out.acceptance["reflect"]["rate"] == 1.0

    def test_frozen_chain_raises_tuning_error(self):
        # overwhelming pair coupling freezes every bridge move
        kernel = PairKernel.gaussian_omega1(d=3, width=1.0)
        grid = build_grid(kernel, r_max=6.0, t_max=4.0, n_r=200, n_t=17)
        model = ModelSpec(d=3, delta=0.0, alpha=1e6, horizon=4.0, n_steps=16,
                          kernel=kernel, grid=grid)
        cfg = ChainConfig(sweeps=600, burn_in=500, thinning=1, seed=3,
                          bridge_weight=1.0, endpoint_weight=0.0,
                          reflect_weight=0.0)
        with pytest.raises(TuningError):
            mcmc_run(model, cfg)


# ---------------------------------------------------------------------------
# stationary law on a two-step chain against direct quadrature
# ---------------------------------------------------------------------------

DB_DT = 0.5
DB_DELTA = 1.2
DB_ALPHA = 0.8
DB_M = 1.25


def _db_model():
    kernel = PairKernel.gaussian_omega1(d=1, width=1.0)
    grid = build_grid(kernel, r_max=8.0, t_max=1.0, n_r=600, n_t=3)
    return ModelSpec(d=1, delta=DB_DELTA, alpha=DB_ALPHA, horizon=1.0,
                     n_steps=2, potential=ExternalPotential.well(1.0),
                     kernel=kernel, grid=grid, m_radius=DB_M)


def _cell(x):
    return int(np.clip(np.rint(x / 0.5), -2, 2)) + 2


def _db_oracle(model):
    """Cell masses of the two free points by adaptive panel quadrature.

    Panels follow both the cell edges and the potential discontinuity at
    |x| = 1, so every panel integrand is smooth.
    """
    table = build_pair_table(model.grid, model.n_steps, model.dt)
    nodes, wts = np.polynomial.legendre.leggauss(16)
    edges1 = [-6.0, -1.0, -0.75, -0.25, 0.25, 0.75, 1.0, 6.0]
    edges2 = [-1.25, -1.0, -0.75, -0.25, 0.25, 0.75, 1.0, 1.25]
    dt = model.dt
    mass = np.zeros((5, 5))
    for lo1, hi1 in zip(edges1[:-1], edges1[1:]):
        x1n = 0.5 * (hi1 + lo1) + 0.5 * (hi1 - lo1) * nodes
        w1 = 0.5 * (hi1 - lo1) * wts
        i = _cell(0.5 * (lo1 + hi1))
        for lo2, hi2 in zip(edges2[:-1], edges2[1:]):
            x2n = 0.5 * (hi2 + lo2) + 0.5 * (hi2 - lo2) * nodes
            w2 = 0.5 * (hi2 - lo2) * wts
            j = _cell(0.5 * (lo2 + hi2))
            s = 0.0
            for x1, ww1 in zip(x1n, w1):
                for x2, ww2 in zip(x2n, w2):
                    path = DiscretePath(d=1, dt=dt,
                                        points=np.array([[0.0], [x1], [x2]]))
                    av = action(path, model.potential, table)
                    expo = (-x1 * x1 / (2 * dt) - (x2 - x1) ** 2 / (2 * dt)
                            + model.delta * av.v_part
                            + model.alpha * av.w_part)
                    s += ww1 * ww2 * math.exp(expo)
            mass[i, j] += s
    return mass / mass.sum()


@pytest.fixture(scope="module")
def db_run():
    cfg = ChainConfig(sweeps=20000, burn_in=2000, thinning=3, seed=23,
                      keep_paths=True)
    return mcmc_run(_db_model(), cfg)


class TestStationaryLaw:
    def test_cellwise_agreement(self, db_run):
        oracle = _db_oracle(_db_model())
        pts = np.array([[p.points[1, 0], p.points[2, 0]] for p in db_run.paths])
        ci = np.clip(np.rint(pts[:, 0] / 0.5), -2, 2).astype(int) + 2
        cj = np.clip(np.rint(pts[:, 1] / 0.5), -2, 2).astype(int) + 2
        checked = 0
        for i in range(5):
            for j in range(5):
                p_exact = oracle[i, j]
                if p_exact < 1e-4:
                    continue
                ind = ((ci == i) & (cj == j)).astype(float)
                p_mc, se, _ = batch_means(ind)
                se = max(se, 1e-4)
                assert abs(p_mc - p_exact) <= 5.0 * se, \
                    f"cell ({i},{j}): mc {p_mc:.4f} vs exact {p_exact:.4f}"
                checked += 1
        assert checked >= 20

    def test_interacting_drift_negligible(self, db_run):
        assert db_run.action_drift <= 1e-10

    def test_endpoint_inside_ball(self, db_run):
        assert np.all(db_run.endpoint_radii <= DB_M + 1e-12)


# ---------------------------------------------------------------------------
# direct averaging and reweighting
# ---------------------------------------------------------------------------

class TestPartitionEstimate:
    def test_monotone_in_start_distance(self):
        # mass of the attractive-well tilt can only drop as the pinned
        # start moves away from the well
        model = ModelSpec(d=3, delta=1.5, alpha=0.0, horizon=1.0, n_steps=8,
                          potential=ExternalPotential.well(1.0))
        zs = [0.0, 0.5, 1.0]
        ests = []
        for k, z in enumerate(zs):
            start = np.array([z, 0.0, 0.0])
            est, se = partition_estimate(model, 30000, seed=41 + k,
                                         start=start)
            ests.append((est, se))
        for (e_near, s_near), (e_far, s_far) in zip(ests[:-1], ests[1:]):
            jse = math.hypot(s_near, s_far)
            assert e_near - e_far >= -3.0 * jse

    def test_free_partition_is_one(self):
        model = free_model(d=1, horizon=1.0, n_steps=8)
        est, se = partition_estimate(model, 2000, seed=7)
        assert est == pytest.approx(1.0, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)


@pytest.fixture(scope="module")
def base_run():
    model = ModelSpec(d=1, delta=0.2, alpha=0.0, horizon=4.0, n_steps=64,
                      potential=ExternalPotential.well(1.0))
    cfg = ChainConfig(sweeps=9000, burn_in=1500, thinning=5, seed=29)
    return mcmc_run(model, cfg)


class TestReweight:
    def test_identity_reweight(self, base_run):
        rep = reweight_check(base_run, 0.2, functional="midpoint")
        assert rep.estimate == pytest.approx(
            float(np.mean(base_run.midpoint_in_k)), abs=1e-12)
        assert rep.effective_samples == pytest.approx(base_run.n_retained)

    def test_shift_matches_direct_chain(self, base_run):
        rep = reweight_check(base_run, 0.25, functional="midpoint")
        model = ModelSpec(d=1, delta=0.25, alpha=0.0, horizon=4.0, n_steps=64,
                          potential=ExternalPotential.well(1.0))
        direct = midpoint_mass(mcmc_run(model, ChainConfig(
            sweeps=9000, burn_in=1500, thinning=5, seed=30)))
        jse = math.hypot(rep.standard_error, direct.std_error)
        assert abs(rep.estimate - direct.value) <= 5.0 * jse

    def test_bad_inputs(self, base_run):
        with pytest.raises(ValidationError):
            reweight_check(base_run, -0.1)
        with pytest.raises(ValidationError):
            reweight_check(base_run, 0.3, functional="radius")


def test_pair_coupling_pulls_midpoint_inward():
    kernel = PairKernel.gaussian_omega1(d=3, width=1.0)
    grid = build_grid(kernel, r_max=10.0, t_max=8.0, n_r=300, n_t=129)
    kw = dict(d=3, horizon=8.0, n_steps=128, k_radius=1.0)
    plain = ModelSpec(delta=0.0, alpha=0.0, **kw)
    coupled = ModelSpec(delta=0.0, alpha=6.0, kernel=kernel, grid=grid, **kw)
    cfg0 = ChainConfig(sweeps=3500, burn_in=700, thinning=4, seed=33)
    cfg1 = ChainConfig(sweeps=3500, burn_in=700, thinning=4, seed=34)
    m0 = midpoint_mass(mcmc_run(plain, cfg0))
    m1 = midpoint_mass(mcmc_run(coupled, cfg1))
    jse = math.hypot(m0.std_error, m1.std_error)
    assert m1.value - m0.value >= -3.0 * jse
