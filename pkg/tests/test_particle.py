import numpy as np
import pytest
from scipy import stats

from bgkness.model import Params
from bgkness.particle import (available_backends, default_backend,
                              doeblin_check, empirical_moments,
                              meanfield_sigma, sample_ness, step_ensemble)
from bgkness._jump_py import _interp_periodic

HAVE_CYTHON = "cython" in available_backends()


def cell_reference_T(res, n_cells):
    centers = (np.arange(n_cells) + 0.5) / n_cells
    return _interp_periodic(centers, res.T.samples)


def test_backend_registry():
    assert "python" in available_backends()
    assert default_backend() in available_backends()


def test_sample_ness_deterministic(regime):
    a = sample_ness(regime.res.g, 5000, seed=42)
    b = sample_ness(regime.res.g, 5000, seed=42)
    c = sample_ness(regime.res.g, 5000, seed=43)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
    assert not np.array_equal(a.v, c.v)
    assert a.x.min() >= 0.0 and a.x.max() < 1.0


def test_sample_ness_moments(regime):
    ens = sample_ness(regime.res.g, 200000, seed=9)
    cs = empirical_moments(ens, n_cells=32)
    Tref = cell_reference_T(regime.res, 32)
    sig = meanfield_sigma(Tref, cs.counts)
    assert int(cs.counts.sum()) == ens.n
    assert np.max(np.abs(cs.u) / sig["sigma_u"]) < 4.5
    assert np.max(np.abs(cs.T - Tref) / sig["sigma_T"]) < 4.5


def test_step_is_deterministic_and_advances_clock(regime):
    ens = sample_ness(regime.res.g, 20000, seed=4)
    prof = {"tau": regime.tau, "T": regime.res.T}
    a = step_ensemble(ens, 0.5, "linear", prof, regime.params)
    b = step_ensemble(ens, 0.5, "linear", prof, regime.params)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
    assert a.time == 0.5 and a.step_index == 1
    # the source ensemble is untouched
    assert ens.time == 0.0 and not np.array_equal(a.v, ens.v)


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled backend not built")
def test_backends_bit_identical(regime):
    ens = sample_ness(regime.res.g, 30000, seed=6)
    prof = {"tau": regime.tau, "T": regime.res.T}
    out = {}
    for be in ("python", "cython"):
        out[be] = step_ensemble(ens, 1.0, "linear", prof, regime.params,
                                track_counts=True, backend=be)
    assert np.array_equal(out["python"].x, out["cython"].x)
    assert np.array_equal(out["python"].v, out["cython"].v)
    assert np.array_equal(out["python"].meta["jump_counts"],
                          out["cython"].meta["jump_counts"])


def test_jump_counts_are_poisson(regime):
    # rate-1/kappa exponential clocks over t = 2 give Poisson(2) counts
    ens = sample_ness(regime.res.g, 100000, seed=77)
    prof = {"tau": regime.tau, "T": regime.res.T}
    out = step_ensemble(ens, 2.0, "linear", prof, regime.params,
                        track_counts=True)
    k = out.meta["jump_counts"]
    assert abs(k.mean() - 2.0) < 3.0 * np.sqrt(2.0 / k.size)
    kmax = 8
    obs = np.bincount(np.minimum(k, kmax + 1), minlength=kmax + 2).astype(float)
    pm = stats.poisson.pmf(np.arange(kmax + 1), 2.0)
    exp = np.concatenate((pm, [stats.poisson.sf(kmax, 2.0)])) * k.size
    chi2, p = stats.chisquare(obs, exp)
    assert p > 1e-3


def test_stationary_velocity_law_per_cell(regime):
    # evolve NESS samples for t = 1 and KS-test each cell's velocities
    # against the sampler's piecewise-linear conditional CDF
    g = regime.res.g
    grid = regime.grid
    ens = sample_ness(g, 400000, seed=5)
    prof = {"tau": regime.tau, "T": regime.res.T}
    out = step_ensemble(ens, 1.0, "linear", prof, regime.params)
    hv = grid.v[1] - grid.v[0]
    edges = np.concatenate(([grid.v[0] - 0.5 * hv], grid.v + 0.5 * hv))
    idx = np.minimum((out.x * grid.nx).astype(np.int64), grid.nx - 1)
    pmin = 1.0
    for c in range(grid.nx):
        w = grid.wv * g.values[c]
        cdf = np.concatenate(([0.0], np.cumsum(w)))
        cdf /= cdf[-1]
        sample = out.v[idx == c]
        _, p = stats.kstest(sample, lambda t: np.interp(t, edges, cdf))
        pmin = min(pmin, p)
    assert pmin > 0.01 / grid.nx


def test_meanfield_step_smoke(regime):
    ens = sample_ness(regime.res.g, 50000, seed=13)
    prof = {"tau": regime.tau}
    out = step_ensemble(ens, 0.25, "meanfield", prof, regime.params,
                        cells=32, min_occupancy=50)
    assert out.meta["fallback_cells"] == []
    Tf = out.meta["T_field"]
    assert np.all(np.isfinite(Tf)) and np.all(Tf > 0.0)
    Tref = cell_reference_T(regime.res, 32)
    assert np.max(np.abs(Tf - Tref)) < 0.5


def test_meanfield_fallback_flagging(regime):
    # everything clustered in one cell: the other 31 need the neighbor fill
    rng = np.random.default_rng(0)
    from bgkness.particle import ParticleEnsemble
    ens = ParticleEnsemble(x=rng.random(5000) / 32.0,
                           v=rng.standard_normal(5000) * np.sqrt(5.0),
                           time=0.0, seed=10)
    out = step_ensemble(ens, 0.1, "meanfield", {"tau": regime.tau},
                        regime.params, cells=32, min_occupancy=50)
    assert len(out.meta["fallback_cells"]) == 31
    assert np.all(np.isfinite(out.meta["T_field"]))


def test_meanfield_sigma_scaling():
    s1 = meanfield_sigma(5.0, 1000)
    s4 = meanfield_sigma(5.0, 4000)
    assert np.isclose(s1["sigma_u"], np.sqrt(5.0 / 1000))
    assert np.isclose(s1["sigma_T"], 5.0 * np.sqrt(2.0 / 1000))
    assert np.isclose(s1["sigma_u"] / s4["sigma_u"], 2.0)
    assert np.isclose(s1["sigma_T"] / s4["sigma_T"], 2.0)


def test_empirical_moments_totals(regime):
    ens = sample_ness(regime.res.g, 64000, seed=2)
    cs = empirical_moments(ens, n_cells=16)
    assert cs.counts.sum() == 64000
    assert np.isclose(cs.rho.mean(), 1.0)
    assert cs.edges.shape == (17,)


def test_doeblin_positive_mass(regime):
    prof = {"tau": regime.tau, "T": regime.res.T}
    out = doeblin_check(0.3, 0.5, 2.0, 20000, 3, prof, regime.params,
                        cells=(8, 4))
    assert out["beta_hat"] > 0.0
    assert out["recommended_n"] is None
    assert out["hist"].shape == (8, 4)
    assert out["hist"].sum() <= 20000  # particles outside the window drop out


def test_doeblin_undersampled_recommendation(regime):
    prof = {"tau": regime.tau, "T": regime.res.T}
    out = doeblin_check(0.3, 0.5, 2.0, 60, 3, prof, regime.params,
                        cells=(32, 16))
    assert out["beta_hat"] == 0.0
    assert out["min_count"] == 0
    assert out["recommended_n"] == 600
