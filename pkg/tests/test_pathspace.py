import io
import math

import numpy as np
import pytest

from polaronlab import (
    DiscretePath,
    ExternalPotential,
    KernelGrid,
    PairKernel,
    ValidationError,
    action,
    action_delta_parts,
    action_exact_smooth,
    build_pair_table,
    sample_bridge,
    sample_wiener,
)
from polaronlab.pathspace import trapezoid_weights
from polaronlab import accel

# single unit step with both points at the origin, gaussian kernel in d=1:
# (sqrt(pi)/8) * (1 + exp(-1))
TWO_POINT_W = 0.3030628978848510


@pytest.fixture(scope="module")
def gauss1():
    return PairKernel.gaussian_omega1(d=1)


@pytest.fixture(scope="module")
def grid1(gauss1):
    return KernelGrid(gauss1, r_max=8.0, t_max=4.0, n_r=1600, n_t=257)


def test_trapezoid_weights():
    w = trapezoid_weights(4)
    np.testing.assert_allclose(w, [0.5, 1.0, 1.0, 1.0, 0.5])


def test_two_point_pair_action(gauss1):
    path = DiscretePath(d=1, dt=1.0, points=np.zeros((2, 1)))
    out = action_exact_smooth(path, None, gauss1)
    assert out.w_part == pytest.approx(TWO_POINT_W, rel=1e-12)
    assert out.v_part == 0.0


def test_resting_path_collects_full_well_time(well1):
    path = DiscretePath(d=3, dt=0.125, points=np.zeros((33, 3)))
    out = action(path, well1)
    assert out.v_part == pytest.approx(4.0, rel=1e-12)


def test_table_action_matches_direct_kernel(gauss1, grid1, well1):
    path = sample_wiener(d=1, n_steps=64, dt=1.0 / 16, seed=3)
    tabled = action(path, well1, grid1)
    direct = action_exact_smooth(path, well1, gauss1)
    assert tabled.v_part == direct.v_part
    assert tabled.w_part == pytest.approx(direct.w_part, rel=2e-5)


def test_identity_replacement_changes_nothing(gauss1, grid1, well1):
    path = sample_wiener(d=1, n_steps=32, dt=0.05, seed=9)
    table = build_pair_table(grid1, path.n_steps, path.dt)
    dv, dw, misses = action_delta_parts(path, 5, 12, path.points[5:12],
                                        well1, table)
    assert dv == 0.0
    assert dw == pytest.approx(0.0, abs=1e-13)
    assert misses == 0


def test_delta_equals_full_recompute(gauss1, grid1, well1):
    rng = np.random.default_rng(11)
    path = sample_wiener(d=2, n_steps=48, dt=0.05, seed=rng)
    grid = KernelGrid(PairKernel.gaussian_omega1(d=2), r_max=10.0,
                      t_max=48 * 0.05, n_r=800, n_t=49)
    table = build_pair_table(grid, path.n_steps, path.dt)
    before = action(path, well1, table)
    start, stop = 10, 31
    block = path.points[start:stop] + rng.normal(scale=0.3,
                                                 size=(stop - start, 2))
    dv, dw, _ = action_delta_parts(path, start, stop, block, well1, table)
    pts = path.points.copy()
    pts[start:stop] = block
    after = action(DiscretePath(d=2, dt=path.dt, points=pts), well1, table)
    assert after.v_part - before.v_part == pytest.approx(dv, abs=1e-12)
    assert after.w_part - before.w_part == pytest.approx(dw, abs=1e-11)


def test_incremental_updates_do_not_drift(well1):
    # a chain of 200 random block replacements, tracked incrementally,
    # must stay on top of the full recomputation
    rng = np.random.default_rng(4)
    kernel = PairKernel.gaussian_omega1(d=1)
    grid = KernelGrid(kernel, r_max=10.0, t_max=2.0, n_r=600, n_t=41)
    path = sample_wiener(d=1, n_steps=40, dt=0.05, seed=rng)
    table = build_pair_table(grid, path.n_steps, path.dt)
    running = action(path, well1, table)
    v, w = running.v_part, running.w_part
    pts = path.points.copy()
    for _ in range(200):
        start = int(rng.integers(0, 38))
        stop = int(rng.integers(start + 1, 41))
        block = pts[start:stop] + rng.normal(scale=0.2,
                                             size=(stop - start, 1))
        cur = DiscretePath(d=1, dt=path.dt, points=pts)
        dv, dw, _ = action_delta_parts(cur, start, stop, block, well1, table)
        v += dv
        w += dw
        pts[start:stop] = block
    full = action(DiscretePath(d=1, dt=path.dt, points=pts), well1, table)
    assert abs(v - full.v_part) <= 1e-10
    assert abs(w - full.w_part) <= 1e-10


def test_backends_agree(gauss1, grid1, well1):
    if not accel.HAVE_COMPILED:
        pytest.skip("compiled backend not built")
    path = sample_wiener(d=3, n_steps=96, dt=0.02, seed=17)
    grid = KernelGrid(PairKernel.gaussian_omega1(d=3), r_max=10.0,
                      t_max=96 * 0.02, n_r=700, n_t=97)
    a_py = action(path, well1, grid, backend="python")
    a_cy = action(path, well1, grid, backend="cython")
    assert a_cy.w_part == pytest.approx(a_py.w_part, rel=1e-12)
    assert a_cy.coverage_misses == a_py.coverage_misses


def test_quadrature_order_is_two(well1):
    kernel = PairKernel.gaussian_omega1(d=2)
    horizon = 2.0

    def smooth_path(n):
        t = np.linspace(0.0, horizon, n + 1)
        pts = np.stack([np.sin(1.3 * t) + 0.2 * t, np.cos(0.9 * t) - 1.0],
                       axis=1)
        return DiscretePath(d=2, dt=horizon / n, points=pts)

    ref = action_exact_smooth(smooth_path(8192), well1, kernel).w_part
    sizes = [64, 128, 256]
    errs = [abs(action_exact_smooth(smooth_path(n), well1, kernel).w_part
                - ref) for n in sizes]
    slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    assert -slope == pytest.approx(2.0, abs=0.3)


def test_far_field_counts_misses(gauss1, well1):
    grid = KernelGrid(gauss1, r_max=0.5, t_max=1.0, n_r=64, n_t=17)
    pts = np.linspace(0.0, 4.0, 17)[:, None]
    path = DiscretePath(d=1, dt=1.0 / 16, points=pts)
    out = action(path, well1, grid)
    assert out.coverage_misses > 0


class TestSampling:
    def test_wiener_pinned_start(self):
        path = sample_wiener(d=2, n_steps=16, dt=0.25, seed=0)
        np.testing.assert_array_equal(path.points[0], 0.0)
        assert path.points.shape == (17, 2)

    def test_wiener_endpoint_variance(self):
        reps = 4000
        vals = np.array([sample_wiener(1, 32, 0.125, seed=s).points[-1, 0]
                         for s in range(reps)])
        horizon = 32 * 0.125
        se = horizon * math.sqrt(2.0 / reps)
        assert abs(np.var(vals) - horizon) < 4 * se

    def test_wiener_custom_start(self):
        path = sample_wiener(d=2, n_steps=4, dt=0.1, seed=1,
                             start=np.array([1.0, -2.0]))
        np.testing.assert_array_equal(path.points[0], [1.0, -2.0])

    def test_bridge_hits_both_endpoints(self):
        a, b = np.array([0.5, 0.0]), np.array([-1.0, 2.0])
        path = sample_bridge(a, b, duration=2.0, n_steps=32, seed=5)
        np.testing.assert_allclose(path.points[0], a, atol=1e-14)
        np.testing.assert_allclose(path.points[-1], b, atol=1e-14)

    def test_bridge_midpoint_variance(self):
        reps, duration = 4000, 2.0
        vals = np.array([
            sample_bridge(np.zeros(1), np.zeros(1), duration, 16,
                          seed=s).points[8, 0]
            for s in range(reps)])
        want = duration / 4.0
        se = want * math.sqrt(2.0 / reps)
        assert abs(np.var(vals) - want) < 4 * se

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            sample_bridge(np.zeros(2), np.zeros(3), 1.0, 8, seed=0)

    def test_dump_path_format(self):
        path = sample_wiener(d=2, n_steps=2, dt=0.5, seed=2)
        buf = io.StringIO()
        from polaronlab import dump_path
        dump_path(path, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "step,t,x_1,x_2"
        assert len(lines) == 4
        cells = lines[2].split(",")
        assert float(cells[1]) == pytest.approx(0.5)
        assert float(cells[2]) == pytest.approx(path.points[1, 0])


def test_pair_table_rows_match_lag_times(gauss1):
    grid = KernelGrid(gauss1, r_max=6.0, t_max=2.0, n_r=256, n_t=33)
    table = build_pair_table(grid, 32, 2.0 / 32)
    from polaronlab import eval_W
    for k in (0, 7, 32):
        np.testing.assert_allclose(
            table.values[k], eval_W(gauss1, grid.r_nodes, k * 2.0 / 32),
            rtol=0, atol=1e-10)


def test_block_bounds_validated(gauss1, well1):
    path = sample_wiener(d=1, n_steps=8, dt=0.1, seed=0)
    with pytest.raises(ValidationError):
        action_delta_parts(path, 5, 4, np.zeros((0, 1)), well1, None)
    with pytest.raises(ValidationError):
        action_delta_parts(path, 0, 2, np.zeros((3, 1)), well1, None)
