import time
from types import SimpleNamespace

import numpy as np
import pytest

from bgkness.model import Params, make_grid
from bgkness.steady_state import fixed_point
from bgkness.linearized import assemble_L, split_CT, spectral_gap
from bgkness.evolution import decay_rate

VMAX = 8.0 * np.sqrt(5.0)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 64, VMAX)


@pytest.fixture(scope="session")
def equilibrium(grid32):
    """Constant thermostat tau = 5, alpha = 0.1: steady state is Maxwellian."""
    tau = np.full(grid32.nx, 5.0)
    p = Params(alpha=0.1, kappa=1.0)
    t0 = time.perf_counter()
    res = fixed_point(tau, p, grid32)
    el = time.perf_counter() - t0
    return SimpleNamespace(tau=tau, params=p, res=res, grid=grid32, elapsed=el)


@pytest.fixture(scope="session")
def regime(grid32):
    """Working regime: tau = 5 + 0.5 cos(2 pi x), alpha = 0.05, kappa = 1."""
    tau = 5.0 + 0.5 * np.cos(2.0 * np.pi * grid32.x)
    p = Params(alpha=0.05, kappa=1.0)
    t0 = time.perf_counter()
    res = fixed_point(tau, p, grid32)
    el = time.perf_counter() - t0
    return SimpleNamespace(tau=tau, params=p, res=res, grid=grid32, elapsed=el)


@pytest.fixture(scope="session")
def regime_L(regime):
    t0 = time.perf_counter()
    L = assemble_L(regime.res.g, regime.tau, regime.params)
    return SimpleNamespace(L=L, elapsed=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def regime_split(regime_L):
    C, T_op = split_CT(regime_L.L)
    return SimpleNamespace(C=C, T=T_op)


@pytest.fixture(scope="session")
def regime_gap(regime_L):
    t0 = time.perf_counter()
    gr = spectral_gap(regime_L.L)
    return SimpleNamespace(gap=gr, elapsed=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def regime_decay(regime_L):
    """Measured decay rate of the linearized flow from the default probe."""
    return decay_rate(regime_L.L)


@pytest.fixture(scope="session")
def regime_double(regime):
    """Same physics on the doubled grid, for refinement checks."""
    grid = make_grid(64, 128, VMAX)
    tau = 5.0 + 0.5 * np.cos(2.0 * np.pi * grid.x)
    res = fixed_point(tau, regime.params, grid)
    return SimpleNamespace(tau=tau, params=regime.params, res=res, grid=grid)
