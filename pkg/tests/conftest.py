"""Shared fixtures.

The expensive MCMC cells used by the end-to-end gate are session scoped so
the localization scan and the thermodynamic-integration curve are computed
once and shared between the tests that grade different aspects of them.
"""

import numpy as np
import pytest
from hypothesis import settings

from polaronlab import (
    ChainConfig,
    ExternalPotential,
    KernelGrid,
    ModelSpec,
    PairKernel,
    mcmc_run,
)

settings.register_profile("repo", deadline=None, max_examples=40,
                          derandomize=True)
settings.load_profile("repo")

DSTAR = np.pi**2 / 8.0  # binding threshold of the unit 3d well


@pytest.fixture(scope="session")
def well1():
    return ExternalPotential.well(1.0)


@pytest.fixture(scope="session")
def dstar():
    return DSTAR


def _localization_model(alpha, horizon, n_steps, well, kernel):
    grid = None
    if alpha > 0:
        grid = KernelGrid(kernel, r_max=12.0, t_max=horizon, n_r=400,
                          n_t=n_steps + 1)
    return ModelSpec(d=3, delta=0.8 * DSTAR, alpha=alpha, horizon=horizon,
                     n_steps=n_steps, potential=well, grid=grid,
                     m_radius=1.5, k_radius=1.0)


@pytest.fixture(scope="session")
def localization_cells(well1):
    """Chain outputs for the alpha scan at T=32 plus the alpha=0, T=64 cell.

    Geometry shared by the localization and occupation tests: unit well,
    delta = 0.8 * threshold (no bound state without the pair term),
    diagnostic ball K = 1, endpoint ball M = 1.5, dt = 1/16.
    """
    kernel = PairKernel.gaussian_omega1(d=3, width=1.0)
    cells = {}
    budgets = {
        (0.0, 32.0): ChainConfig(sweeps=28000, burn_in=4000, thinning=5,
                                 seed=101),
        (5.0, 32.0): ChainConfig(sweeps=6000, burn_in=1500, thinning=5,
                                 seed=102),
        (20.0, 32.0): ChainConfig(sweeps=6000, burn_in=1500, thinning=5,
                                  seed=103),
        (80.0, 32.0): ChainConfig(sweeps=6000, burn_in=1500, thinning=5,
                                  seed=104),
        (0.0, 64.0): ChainConfig(sweeps=28000, burn_in=4000, thinning=5,
                                 seed=105),
    }
    for (alpha, horizon), config in budgets.items():
        n_steps = int(horizon * 16)
        model = _localization_model(alpha, horizon, n_steps, well1, kernel)
        cells[(alpha, horizon)] = mcmc_run(model, config)
    return cells


@pytest.fixture(scope="session")
def ti_bundle(well1):
    """Thermodynamic-integration curve at the pinned bridge cell."""
    from polaronlab import free_energy_rate

    model = ModelSpec(d=3, delta=3 * DSTAR, alpha=0.0, horizon=16.0,
                      n_steps=1024, potential=well1)
    deltas = np.linspace(0.0, 3 * DSTAR, 13)
    config = ChainConfig(sweeps=1800, burn_in=600, thinning=6, seed=0)
    return free_energy_rate(model, deltas, config)


@pytest.fixture(scope="session")
def ks_run():
    """Interaction-free chain whose endpoint law has a closed-form oracle."""
    model = ModelSpec(d=3, delta=0.0, alpha=0.0, horizon=8.0, n_steps=256,
                      m_radius=2.0)
    config = ChainConfig(sweeps=64000, burn_in=4000, thinning=20,
                         bridge_weight=0.55, endpoint_weight=0.40,
                         reflect_weight=0.05, seed=20)
    return mcmc_run(model, config)
