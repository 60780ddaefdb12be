"""Steady states, hypocoercive spectral gaps and particle simulations for a
thermostatted BGK relaxation model on the one-dimensional torus."""

__version__ = "0.1.0"

from .model import (Params, PhaseGrid, Profile, KineticState, MomentSet,
                    make_grid, constant_profile, cosine_profile, maxwellian,
                    moments, weighted_inner, weighted_norm, project_pi,
                    DomainError, DegenerateStateError, WeightError)
from .steady_state import (fixed_point, map_F, solve_density, steady_state_g,
                           collocation_polish, collocation_residual,
                           lipschitz_probe, check_bounds, transport_weight,
                           kernel_K1, kernel_K2, NessResult, ConvergenceError)
from .linearized import (assemble_L, assemble_adjoint_formula, split_CT,
                         closed_form_defects, coercivity_report,
                         micro_coercivity, macro_coercivity, operator_A,
                         entropy, dissipation, entropy_eps_scan, spectral_gap,
                         perturbation_scaling, OperatorMatrix,
                         CoercivityReport, GapResult)
from .evolution import (step_nonlinear, evolve_nonlinear, step_linear,
                        make_linear_propagator, decay_rate, TrajectoryLog)
from .particle import (ParticleEnsemble, CellStats, sample_ness,
                       step_ensemble, empirical_moments, meanfield_sigma,
                       doeblin_check, available_backends, default_backend)

__all__ = [name for name in dir() if not name.startswith("_")]
