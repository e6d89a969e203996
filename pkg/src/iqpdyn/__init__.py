"""Indefinite quadratic programs: DCA schemes, projected flows and exact 1D oracles."""

from .core import (
    AviProblem,
    Ball,
    Box,
    ConvergenceError,
    DimensionError,
    InvariantError,
    Polyhedron,
    PreconditionError,
    QuadraticProblem,
    SolverConfig,
    SolveResult,
    SolveTrace,
    Termination,
    UnitInterval,
    load_problem,
    objective_value,
    save_problem,
)
from .dca import DcaRun, estimate_r_linear_rate, kkt_residual, run_dca, scheme_a_step, solve_subproblem_fc
from .dynamics import Trajectory, VectorField, detect_limit, eval_field, integrate
from .projection import ProjectionError, ProjectionResult, project
from .scalar import (
    ScalarKktSet,
    ScalarProblem,
    SpmVerdict,
    classify_spm,
    cone_membership_map,
    estimate_gamma,
    exact_trajectory,
    falsify_spm,
    scalar_kkt_set,
    trajectory_limit_is_kkt,
)
from .spectral import SpectralBounds, choose_rho, gershgorin_bounds, power_iteration_extremes

__all__ = [name for name in dir() if not name.startswith("_")]
