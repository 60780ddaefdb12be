"""End-to-end acceptance gate.

Each test pins one quantitative contract of the workbench: steady-state
construction, kernel calibration, contraction of the temperature map,
agreement between the linearized spectrum and the nonlinear flow, operator
splitting algebra, coercivity constants, the dense spectral gap, particle
minorization, mean-field consistency and thermostat perturbation response.
Tolerances were fixed when the suite was first written; loosening them
needs a recorded justification.
"""

import time

import numpy as np

from bgkness.model import (KineticState, Params, maxwellian, project_pi,
                           weighted_norm)
from bgkness.steady_state import (displacement_quadrature, fixed_point,
                                  lipschitz_probe, transport_weight)
from bgkness.linearized import (assemble_L, closed_form_defects, dx_matrix,
                                macro_coercivity, micro_coercivity,
                                perturbation_scaling, split_CT)
from bgkness.evolution import (default_decay_probe, evolve_nonlinear,
                               rhs_nonlinear)
from bgkness import particle as pt
from bgkness._jump_py import _interp_periodic

DIRACS = [[0.1, 0.3], [0.35, -0.7], [0.5, 0.0], [0.65, 1.0], [0.9, -0.5]]


# 1. constant thermostat: the fixed point reproduces the global Maxwellian
def test_equilibrium_recovery(equilibrium):
    grid = equilibrium.grid
    assert equilibrium.elapsed < 5.0
    T = equilibrium.res.T.samples
    assert np.max(np.abs(T - 5.0)) < 1e-8
    M5 = np.tile(maxwellian(grid.v, 0.0, 5.0), (grid.nx, 1))
    assert np.max(np.abs(equilibrium.res.g.values - M5)) < 1e-6


# 2. displacement kernel: the transport weight is a probability in y
def test_kernel_weight_calibration(grid32):
    yq, wy, _ = displacement_quadrature(1)
    defect = max(abs(float(transport_weight(v, yq, 1.0) @ wy) - 1.0)
                 for v in grid32.v)
    assert defect < 1e-10


# 3. steady-state identities: no bulk velocity, uniform pressure, unit mass
def test_steady_state_identities(regime):
    mom = regime.res.moments
    assert np.max(np.abs(mom.u)) < 1e-8
    P = mom.P
    assert (P.max() - P.min()) / P.mean() < 1e-6
    assert abs(regime.res.g.mass() - 1.0) < 1e-12


# 4. the temperature map contracts and the limit ignores the seed profile
def test_contraction_and_seed_independence(regime, grid32):
    lp = lipschitz_probe(regime.tau, regime.params, grid32,
                         n_pairs=20, seed=0)
    assert lp["n_pairs"] >= 20
    assert lp["max_ratio"] < 1.0
    rt = regime.res.ratio_trace
    assert len(rt) > 3
    assert max(rt) < 1.0
    assert np.std(rt[2:]) < 0.05  # settled, not drifting
    lo = fixed_point(regime.tau, regime.params, grid32, T0=4.5)
    hi = fixed_point(regime.tau, regime.params, grid32, T0=5.5)
    assert np.max(np.abs(lo.T.samples - hi.T.samples)) < 1e-12


# 5. the nonlinear flow started from the mean Maxwellian lands on the NESS
def test_evolution_reaches_steady_state(regime):
    grid = regime.grid
    taubar = float(np.mean(regime.tau))
    f0 = KineticState(np.tile(maxwellian(grid.v, 0.0, taubar),
                              (grid.nx, 1)), grid)
    t0 = time.perf_counter()
    log = evolve_nonlinear(f0, 50.0, 0.005, regime.tau, regime.params,
                           observe_dt=10.0, reference=regime.res.g)
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    assert log.dist[-1] < 1e-5


# 6. finite differences of the nonlinear right-hand side converge to L
#    at first order in the perturbation size
def test_linearization_consistency(regime, regime_L):
    g, grid = regime.res.g, regime.grid
    L = regime_L.L
    h = default_decay_probe(L)
    h /= weighted_norm(h, g.values, grid)
    Lh = (L.entries @ h.reshape(-1)).reshape(h.shape)
    nLh = weighted_norm(Lh, g.values, grid)
    base = rhs_nonlinear(g, regime.tau, regime.params)
    errs = {}
    for eps in (1e-2, 1e-3):
        bumped = KineticState(g.values + eps * h, grid)
        fd = (rhs_nonlinear(bumped, regime.tau, regime.params) - base) / eps
        errs[eps] = weighted_norm(fd - Lh, g.values, grid) / nLh
    assert 0.8 < np.log10(errs[1e-2] / errs[1e-3]) < 1.2


# 7. splitting algebra: C + T recovers L, both parts kill the steady state,
#    transport keeps no hydrodynamic component, and the closed-form defects
#    shrink under grid refinement
def test_splitting_algebra(regime, regime_L, regime_split, regime_double):
    g, grid = regime.res.g, regime.grid
    L, C, T = regime_L.L, regime_split.C, regime_split.T
    assert np.max(np.abs(C.entries + T.entries - L.entries)) < 1e-12
    gflat = g.values.reshape(-1)
    for op in (C, T):
        r = (op.entries @ gflat).reshape(g.values.shape)
        assert weighted_norm(r, g.values, grid) < 1e-8
    m = np.cos(2.0 * np.pi * grid.x)
    mg = m[:, None] * g.values
    tmg = (T.entries @ mg.reshape(-1)).reshape(g.values.shape)
    ptp = project_pi(tmg, g.values, grid)
    assert weighted_norm(ptp, g.values, grid) < 1e-8
    d32 = closed_form_defects(g, regime.tau, regime.params)
    d64 = closed_form_defects(regime_double.res.g, regime_double.tau,
                              regime_double.params)
    for key in ("defect_C", "defect_T", "adjoint_exact_defect"):
        assert d32[key] < 1e-6
        assert d64[key] < d32[key]


# 8. microscopic coercivity: exact closed form without self-coupling, and
#    sampling agrees with the restricted eigensolve in the working regime
def test_micro_coercivity(grid32, regime_split):
    tau = np.full(grid32.nx, 5.0)
    p0 = Params(alpha=0.0, kappa=1.0)
    res0 = fixed_point(tau, p0, grid32)
    C0, _ = split_CT(assemble_L(res0.g, tau, p0))
    rep0 = micro_coercivity(C0, n_samples=40, seed=0)
    assert abs(rep0["lambda_eig"] - 1.0) < 1e-6
    rep = micro_coercivity(regime_split.C, n_samples=120, seed=1234)
    assert rep["n_samples"] >= 100
    assert rep["lambda_eig"] > 0.0
    assert abs(rep["lambda_sampling"] - rep["lambda_eig"]) < 1e-6


# 9. macroscopic coercivity: at equilibrium the single-mode transport ratio
#    is the Poincare constant 2 pi sqrt(tau)
def test_macro_coercivity(equilibrium):
    L = assemble_L(equilibrium.res.g, equilibrium.tau, equilibrium.params)
    _, T_op = split_CT(L)
    rep = macro_coercivity(T_op)
    target = 2.0 * np.pi * np.sqrt(5.0)
    assert abs(np.sqrt(rep["lambda_macro"]) - target) < 1e-6 * target


# 10. dense spectrum: one conserved mode aligned with the steady state, a
#     strictly negative gap, and the time-domain decay rate confirms it
def test_spectral_gap(regime_gap, regime_decay):
    gr = regime_gap.gap
    assert regime_gap.elapsed < 120.0
    assert gr.n_zero_modes == 1
    assert gr.zero_mode_alignment < 1e-6
    assert gr.gap > 0.0
    lam = gr.eigenvalues
    nonzero = lam[np.abs(lam) > 1e-8]
    assert np.max(nonzero.real) <= -gr.gap + 1e-9
    assert not regime_decay["inconclusive"]
    assert abs(regime_decay["rate"] - gr.gap) / gr.gap < 0.05


# 11. minorization: every Dirac start spreads mass over all phase cells,
#     with the floor stable across starting points
def test_doeblin_minorization(regime):
    profiles = {"tau": regime.tau, "T": regime.res.T}
    betas = []
    for x0, v0 in DIRACS:
        out = pt.doeblin_check(x0, v0, 2.0, 1000000, 7, profiles,
                               regime.params, cells=(32, 16),
                               v_window=(-1.0, 1.0))
        betas.append(out["beta_hat"])
    b = np.array(betas)
    assert np.all(b > 0.0)
    assert np.max(np.abs(b - b.mean())) / b.mean() <= 0.20


# 12. mean-field runs stay within Monte Carlo error of the NESS moments,
#     with fluctuations following the 1/sqrt(N) law across doublings
def test_meanfield_consistency(regime):
    Tref = _interp_periodic((np.arange(32) + 0.5) / 32, regime.res.T.samples)
    rms = {}
    for n in (50000, 100000, 200000):
        ens = pt.sample_ness(regime.res.g, n, 11)
        for _ in range(8):
            ens = pt.step_ensemble(ens, 0.25, "meanfield",
                                   {"tau": regime.tau}, regime.params,
                                   cells=32, min_occupancy=50)
            assert ens.meta.get("fallback_cells", []) == []
        cs = pt.empirical_moments(ens, 32)
        sig = pt.meanfield_sigma(Tref, cs.counts)
        zu = cs.u / sig["sigma_u"]
        zT = (cs.T - Tref) / sig["sigma_T"]
        assert np.max(np.abs(zu)) < 3.0
        assert np.max(np.abs(zT)) < 3.0
        rms[n] = (float(np.sqrt(np.mean(zu ** 2))),
                  float(np.sqrt(np.mean(zT ** 2))))
    # z-scores use the analytic sigma(N); staying O(1) across N doublings
    # is the scaling check
    for zu_rms, zT_rms in rms.values():
        assert 0.5 < zu_rms < 2.0
        assert 0.5 < zT_rms < 2.0


# 13. thermostat perturbation: operator differences scale at first order
#     and the gap moves at most linearly in the perturbation size
def test_perturbation_response(grid32):
    p = Params(alpha=0.05, kappa=1.0)
    out = perturbation_scaling(5.0, [0.01, 0.02, 0.05, 0.1], p, grid32,
                               n_samples=40, seed=5)
    assert 0.99 <= out["exponent"] <= 2.01
    assert out["gap_drift_slope"] <= 1.0
