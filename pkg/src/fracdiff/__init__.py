"""Finite-difference solvers for the fractional porous-medium / fast-diffusion equation

    d_t (u^(q-1)) + (-Delta)^theta u = 0  on (-L, L),  u = 0 outside,

with the restricted fractional Laplacian discretized by quadrature weights.
"""
__version__ = "0.1.0"

from .kernel import Field, Grid, Kernel, apply, assemble, compute_weights, kernel_for_grid, weight_sum
from .spaces import lq_norm, rayleigh, verify_poincare_sobolev, x_norm, x_norm_sq
from .implicit import NewtonFailure, Trajectory, run, sample_initial, step
from .stationary import optimal_constant, solve_lane_emden
from .decay import audit_trajectory, params_for
from .explicit import cfl_max_dt, run_explicit
from .extinction import dichotomy, run_rescaled
from .asymptotics import extract_profile, linearized_spectrum, rate_fit
from ._backend import BACKEND

__all__ = [
    "__version__",
    "BACKEND",
    "Field",
    "Grid",
    "Kernel",
    "apply",
    "assemble",
    "compute_weights",
    "kernel_for_grid",
    "weight_sum",
    "lq_norm",
    "rayleigh",
    "verify_poincare_sobolev",
    "x_norm",
    "x_norm_sq",
    "NewtonFailure",
    "Trajectory",
    "run",
    "sample_initial",
    "step",
    "optimal_constant",
    "solve_lane_emden",
    "audit_trajectory",
    "params_for",
    "cfl_max_dt",
    "run_explicit",
    "dichotomy",
    "run_rescaled",
    "extract_profile",
    "linearized_spectrum",
    "rate_fit",
]
