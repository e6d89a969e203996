"""Projected dynamical systems A and B, integrated with fixed-step RK4."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import AviProblem, ConvergenceError, DimensionError, PreconditionError, QuadraticProblem
from .dca import FC_MAX_ITER, fc_lipschitz_constant, solve_subproblem_fc
from .projection import ProjectionError
from .spectral import gershgorin_bounds, operator_norm_ub

FC_TOL = 1e-12
GROWTH_SLACK = 1e-9

_STATUS = {
    K.OK: "ok",
    K.CYCLE_GUARD: "projection_failure",
    K.FC_MAX_ITER: "subproblem_max_iter",
    K.NONFINITE: "nonfinite_state",
}


@dataclass(frozen=True, eq=False)
class VectorField:
    """x' = F(x) for system A or B.

    A: F(x) = (P_C(x - (Mx + q)/rho) - x) / eta
    B: F(x) = (F_C(x) - x) / eta, with F_C the minimizer of the strongly convex subproblem.
    """

    kind: str
    problem: QuadraticProblem | AviProblem
    rho: float
    eta: float = 1.0
    fc_tol: float = FC_TOL

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("A", "B"):
            raise ValueError(f"unknown system {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not (self.rho > 0 and self.eta > 0):
            raise PreconditionError("rho and eta must be positive")
        if kind == "B":
            if not isinstance(self.problem, QuadraticProblem):
                raise TypeError("system B needs a symmetric QuadraticProblem")
            if not self.rho > -gershgorin_bounds(self.problem.Q).lambda_min_lb:
                raise PreconditionError("system B needs rho > -lambda_min_lb(Q)")

    @property
    def n(self) -> int:
        return self.problem.n

    def _args(self):
        p = self.problem
        kind, mat, v1, v2, rad = p.C.packed()
        system = K.SYSTEM_A if self.kind == "A" else K.SYSTEM_B
        step = 0.0
        if self.kind == "B":
            step = 1.0 / (gershgorin_bounds(p.Q).lambda_max_ub + self.rho)
        return (system, np.ascontiguousarray(p.M), p.q, kind, mat, v1, v2, rad,
                float(self.rho), float(self.eta), step, float(self.fc_tol), FC_MAX_ITER)

    def __call__(self, x) -> np.ndarray:
        X = np.array(x, dtype=float)
        single = X.ndim <= 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n:
            raise DimensionError(f"points have dimension {X.shape[1]}, expected {self.n}")
        if not np.all(np.isfinite(X)):
            raise ValueError("field evaluated at a non-finite point")
        out = np.empty_like(X)
        status = K.field_batch(*self._args(), np.ascontiguousarray(X), out)
        _raise_for(status)
        return out[0] if single else out

    def certified_lipschitz(self) -> float:
        """(|M|/rho + 2)/eta for system A, (l + 1)/eta for system B."""
        if self.kind == "A":
            return (operator_norm_ub(self.problem.M) / self.rho + 2.0) / self.eta
        return (fc_lipschitz_constant(self.problem.Q, self.rho) + 1.0) / self.eta


def eval_field(v: VectorField, x) -> np.ndarray:
    return v(x)


def _raise_for(status):
    if status == K.CYCLE_GUARD:
        raise ProjectionError("projection failed while evaluating the field")
    if status == K.FC_MAX_ITER:
        raise ConvergenceError("subproblem solver hit its iteration cap")
    if status == K.NONFINITE:
        raise ValueError("non-finite state")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    dists: np.ndarray
    invariance_violation: float
    started_outside: bool = False
    status: str = "ok"

    def __post_init__(self):
        for a in (self.times, self.points, self.dists):
            a.setflags(write=False)

    @property
    def final_point(self) -> np.ndarray:
        return self.points[-1]

    @property
    def completed(self) -> bool:
        return self.status == "ok"


def step_count(T: float, h: float) -> int:
    ratio = T / h
    r = round(ratio)
    if r >= 1 and abs(ratio - r) <= 1e-9 * ratio:
        return int(r)
    return max(1, math.ceil(ratio))


def integrate(v: VectorField, x0, config, stride: int = 1) -> Trajectory:
    """RK4 with step config.h on [0, config.T]; the last step is cut to land on T.

    The state is never pulled back into C. Distance to C is measured after
    every step and its maximum is reported as ``invariance_violation``; the
    returned samples are every ``stride``-th step plus the last one. A
    non-finite state or a failing inner solve ends the run early with the
    partial trajectory and a non-"ok" status.
    """
    x0 = np.atleast_1d(np.array(x0, dtype=float))
    if x0.shape != (v.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({v.n},)")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    started_outside = not v.problem.C.contains(x0)
    nsteps = step_count(config.T, config.h)
    times, pts, dists, max_dist, _, status = K.rk4(
        *v._args(), x0, float(config.h), nsteps, float(config.T), int(stride))
    return Trajectory(times.copy(), pts.copy(), dists.copy(), float(max_dist),
                      started_outside, _STATUS[status])


def check_field_lipschitz(v: VectorField, samples) -> tuple[float, float]:
    """(observed, certified): observed is the largest difference quotient over all sample pairs."""
    X = np.atleast_2d(np.array(samples, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    F = v(X)
    return float(K.max_pairwise_ratio(X, F)), v.certified_lipschitz()


def reference_point(C) -> np.ndarray:
    return C.reference_point()


def growth_constants(v: VectorField) -> tuple[float, float]:
    """(M, L) with |F(x)| <= M + L|x| for all x.

    A: M = (|xbar| + 2|q|/rho)/eta, L = (2|Q|/rho + 1)/eta
    B: M = (l|xbar| + |F_C(xbar)|)/eta, L = (1 + l)/eta
    where xbar is the reference point of C and l the Lipschitz constant of F_C.
    """
    p = v.problem
    xbar = reference_point(p.C)
    if v.kind == "A":
        qn = np.linalg.norm(p.q)
        M = (np.linalg.norm(xbar) + 2.0 * qn / v.rho) / v.eta
        L = (2.0 * operator_norm_ub(p.M) / v.rho + 1.0) / v.eta
        return float(M), float(L)
    ell = fc_lipschitz_constant(p.Q, v.rho)
    fc = solve_subproblem_fc(p, v.rho, xbar, tol=v.fc_tol, certify=False)
    M = (ell * np.linalg.norm(xbar) + np.linalg.norm(fc)) / v.eta
    return float(M), float((1.0 + ell) / v.eta)


def check_growth_bound(v: VectorField, samples) -> bool:
    X = np.atleast_2d(np.array(samples, dtype=float))
    M, L = growth_constants(v)
    norms = np.linalg.norm(v(X), axis=1)
    return bool(np.all(norms <= M + L * np.linalg.norm(X, axis=1) + GROWTH_SLACK))


def detect_limit(traj, window: int, tol: float):
    """Mean of the last ``window`` samples if they are pairwise within ``tol``, else None."""
    pts = traj.points if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    pts = pts.reshape(len(pts), -1)
    if window < 1 or len(pts) < window:
        raise ValueError("trajectory is shorter than the window")
    tail = pts[-window:]
    if window <= 512:
        if np.linalg.norm(tail[:, None, :] - tail[None, :, :], axis=2).max() > tol:
            return None
    # large windows: the bounding-box diagonal bounds every pairwise distance
    elif np.linalg.norm(tail.max(axis=0) - tail.min(axis=0)) > tol:
        return None
    return tail.mean(axis=0)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + ["dist_to_C"])
        for t, x, d in zip(traj.times, traj.points, traj.dists):
            w.writerow([repr(float(t))] + [repr(float(c)) for c in x] + [repr(float(d))])
