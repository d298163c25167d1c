"""Simulation and verification toolkit for v_t = v^k (lap v - f) with Neumann data."""
from .criticality import classify_regime, k_critical, k_from_m, pme_exponent, s_critical
from .diagnostics import (energy, energy_identity_residual, entropy, entropy_identity_residual,
                          fit_decay_rate, gradient_bound_check, mass, positivity_bound_check)
from .estimators import DecayRateEstimator, Simulator, SteadyStateSolver
from .evolution import Problem, Trajectory, evolve, step_u_form, step_v_form, to_u, to_v
from .grid import Field, Grid, grad_sq_integral, h1_distance, integrate, laplacian, make_grid
from .sources import SourceTerm, TimeProfile, eval_source, ls_lr_norm, project_zero_mean
from .steady import (SteadyState, build_steady_state, calibrate_mass,
                     positivity_refinement_check, solve_neumann_poisson)

__version__ = "0.1.0"
