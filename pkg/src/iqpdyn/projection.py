"""Metric projection onto the supported constraint sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import MEMBERSHIP_TOL, DimensionError, Polyhedron


class ProjectionError(RuntimeError):
    """The polyhedral active-set method hit its cycle guard."""


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    active_set: tuple = ()
    kkt_residual: float = 0.0


def _as_input(C, u):
    u = np.atleast_1d(np.array(u, dtype=float))
    if u.shape != (C.dim,):
        raise DimensionError(f"point has shape {u.shape}, set has dimension {C.dim}")
    if not np.all(np.isfinite(u)):
        raise ValueError("cannot project a non-finite point")
    return u


def project(C, u) -> ProjectionResult:
    """Nearest point of C to u.

    Box and unit interval clamp componentwise, the ball scales radially, and a
    polyhedron {Ax <= b} is handled by a primal active-set method started from
    its stored feasible point (lowest-index rule for both the blocking and the
    dropped constraint). For polyhedra ``kkt_residual`` certifies the answer:
    it is the largest of primal infeasibility, stationarity error, negative
    multipliers and the variational inequality <u - x, y - x> <= 0 checked at
    the stored feasible point.
    """
    u = _as_input(C, u)
    x = np.empty_like(u)
    if not isinstance(C, Polyhedron):
        kind, mat, v1, v2, rad = C.packed()
        K.project(kind, mat, v1, v2, rad, u, x)
        return ProjectionResult(x)
    m = C.A.shape[0]
    active = np.zeros(m, dtype=bool)
    lam = np.zeros(m)
    if K.project_polyhedron(C.A, C.b, C.feasible_point, u, x, active, lam) < 0:
        raise ProjectionError("active-set projection exceeded its cycle guard")
    idx = tuple(int(i) for i in np.flatnonzero(active))
    stationarity = np.linalg.norm(x - u + C.A.T @ lam)
    infeasibility = max(float(np.max(C.A @ x - C.b, initial=0.0)), 0.0)
    dual = max(float(-np.min(lam, initial=0.0)), 0.0)
    vi = max(float((u - x) @ (C.feasible_point - x)), 0.0)
    return ProjectionResult(x, idx, float(max(stationarity, infeasibility, dual, vi)))


def project_point(C, u) -> np.ndarray:
    return project(C, u).point


def distance(C, x) -> float:
    """dist(x, C) computed as |x - P_C(x)|."""
    x = _as_input(C, x)
    return float(np.linalg.norm(x - project(C, x).point))


def nonexpansiveness_check(C, u, v) -> bool:
    pu = project(C, u).point
    pv = project(C, v).point
    diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return bool(np.linalg.norm(pu - pv) <= np.linalg.norm(diff) + MEMBERSHIP_TOL)
