"""DCA iteration schemes A (explicit projection step) and B (strongly convex subproblem)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import (
    AviProblem,
    ConvergenceError,
    DimensionError,
    PreconditionError,
    QuadraticProblem,
    SolverConfig,
    SolveTrace,
    Termination,
)
from .projection import ProjectionError, project_point
from .spectral import gershgorin_bounds, rho_is_certified

FC_MAX_ITER = 1_000_000
FINITE_TERMINATION_ULPS = 1000


def _point(p, x):
    x = np.atleast_1d(np.array(x, dtype=float))
    if x.shape != (p.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({p.n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return x


def kkt_residual(p, x) -> float:
    """Natural residual |x - P_C(x - (Mx + q))|; zero exactly at KKT points."""
    x = _point(p, x)
    return float(np.linalg.norm(x - project_point(p.C, x - (p.M @ x + p.q))))


def natural_residual(p, x, step: float) -> float:
    x = _point(p, x)
    return float(np.linalg.norm(x - project_point(p.C, x - step * (p.M @ x + p.q))))


def scheme_a_step(p, rho: float, x) -> np.ndarray:
    if not rho > 0:
        raise PreconditionError("rho must be positive")
    x = _point(p, x)
    return project_point(p.C, x - (p.M @ x + p.q) / rho)


def fc_lipschitz_constant(Q, rho: float) -> float:
    """Lipschitz constant of u -> F_C(u): rho / (rho + lambda_min_lb(Q))."""
    lb = gershgorin_bounds(Q).lambda_min_lb
    if not rho + lb > 0:
        raise PreconditionError("rho + lambda_min_lb(Q) must be positive")
    return rho / (rho + lb)


def _sample_points_in(C, center, k=None):
    # deterministic points of C around x*: the reference point plus projected axis moves
    pts = [C.reference_point()]
    n = center.shape[0]
    for i in range(n if k is None else min(k, n)):
        e = np.zeros(n)
        e[i] = 1.0
        pts.append(project_point(C, center + e))
        pts.append(project_point(C, center - e))
    return pts


def solve_subproblem_fc(p: QuadraticProblem, rho: float, u, tol: float = 1e-12,
                        max_iter: int = FC_MAX_ITER, x_init=None, certify: bool = True):
    """F_C(u) = argmin_{x in C} 1/2 x'Qx + q'x + rho/2 |x - u|^2.

    Projected gradient with the fixed step 1/(lambda_max_ub(Q) + rho), stopped
    once a step moves less than ``tol``. With ``certify`` the answer is checked
    against the variational inequality <Qx + q + rho(x - u), y - x> >= -10 tol
    (scaled by the Lipschitz constant of the gradient times |y - x| when that
    exceeds one) at a few deterministic points y of C.
    """
    if not isinstance(p, QuadraticProblem):
        raise TypeError("the subproblem needs a symmetric QuadraticProblem")
    g = gershgorin_bounds(p.Q)
    if not (rho > 0 and rho > -g.lambda_min_lb):
        raise PreconditionError(
            f"rho={rho} is not certified: need rho > -lambda_min_lb = {-g.lambda_min_lb}")
    u = _point(p, u)
    x0 = project_point(p.C, u) if x_init is None else _point(p, x_init)
    lip = g.lambda_max_ub + rho
    out = np.empty_like(u)
    kind, mat, v1, v2, rad = p.C.packed()
    it = K.solve_fc(p.Q, p.q, kind, mat, v1, v2, rad, float(rho), u, x0, 1.0 / lip,
                    float(tol), int(max_iter), out)
    if it == -2:
        raise ProjectionError("projection failed inside the subproblem solver")
    if it < 0:
        raise ConvergenceError(f"subproblem did not settle within {max_iter} iterations")
    if certify:
        grad = p.Q @ out + p.q + rho * (out - u)
        for y in _sample_points_in(p.C, out):
            d = y - out
            slack = -10.0 * tol * max(1.0, lip * np.linalg.norm(d))
            if grad @ d < slack:
                raise ConvergenceError("subproblem solution fails its variational check")
    return out


@dataclass
class DcaRun:
    scheme: str
    config: SolverConfig
    trace: SolveTrace
    final_point: np.ndarray
    rate_estimate: float | None

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1

    @property
    def termination(self) -> Termination:
        return self.trace.termination


def run_dca(p, scheme: str, config: SolverConfig, x0=None, *, unsafe_rho: bool = False,
            fc_tol: float = 1e-12) -> DcaRun:
    """Iterate scheme A or B from x0 until the natural residual drops below tol.

    rho must be certified (Gershgorin) for the chosen scheme unless
    ``unsafe_rho`` is set. x0 defaults to the reference point of C.
    """
    scheme = scheme.upper()
    if scheme not in ("A", "B"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "B" and not isinstance(p, QuadraticProblem):
        raise TypeError("scheme B needs a symmetric QuadraticProblem")
    rho = config.rho
    sym = p.M if isinstance(p, QuadraticProblem) else 0.5 * (p.M + p.M.T)
    if not unsafe_rho and not rho_is_certified(sym, scheme, rho):
        raise PreconditionError(f"rho={rho} is not certified for scheme {scheme}")
    x = _point(p, p.C.reference_point() if x0 is None else x0)
    guard = 1e6 * (1.0 + np.linalg.norm(x))

    t0 = time.perf_counter()
    iterates = [x]
    residuals = [kkt_residual(p, x)]
    termination = Termination.MAX_ITER
    if residuals[0] <= config.residual_tol:
        termination = Termination.RESIDUAL_TOL
    else:
        for _ in range(int(config.max_iter)):
            if scheme == "A":
                x = scheme_a_step(p, rho, x)
            else:
                x = solve_subproblem_fc(p, rho, x, tol=fc_tol, x_init=x,
                                        certify=not unsafe_rho)
            r = kkt_residual(p, x)
            iterates.append(x)
            residuals.append(r)
            if not np.all(np.isfinite(x)) or np.linalg.norm(x) > guard:
                termination = Termination.DIVERGENCE_GUARD
                break
            if r <= config.residual_tol:
                termination = Termination.RESIDUAL_TOL
                break
    trace = SolveTrace(np.array(iterates), np.array(residuals), termination,
                       time.perf_counter() - t0)
    rate = estimate_r_linear_rate(trace, trace.final_point)
    return DcaRun(scheme, config, trace, trace.final_point, rate)


def estimate_r_linear_rate(trace, xbar) -> float | None:
    """Finite-sample proxy for limsup |x^k - xbar|^(1/k).

    Takes the maximum over the last ceil(K/2) iterates, skipping those already
    within 100 machine epsilons of ``xbar``. Returns None when fewer than ten
    iterates exist or nothing usable remains. A SolveTrace whose last
    residual is at roundoff level hit its limit exactly (finite termination);
    it has no asymptotic tail and also gets None.
    """
    X = trace.iterates if isinstance(trace, SolveTrace) else np.asarray(trace, dtype=float)
    X = X.reshape(len(X), -1)
    if len(X) < 10:
        return None
    eps = np.finfo(float).eps
    if isinstance(trace, SolveTrace):
        if trace.final_residual <= FINITE_TERMINATION_ULPS * eps * (1.0 + np.linalg.norm(xbar)):
            return None
    K_ = len(X) - 1
    dist = np.linalg.norm(X - np.asarray(xbar, dtype=float).reshape(1, -1), axis=1)
    ks = np.arange(K_ - math.ceil(K_ / 2) + 1, K_ + 1)
    ks = ks[ks >= 1]
    d = dist[ks]
    keep = d > 100 * eps
    if not np.any(keep):
        return None
    return float(np.max(d[keep] ** (1.0 / ks[keep])))


def is_avi(p) -> bool:
    return isinstance(p, AviProblem)
