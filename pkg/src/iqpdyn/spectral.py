"""Eigenvalue bounds for Q and the choice of the DCA parameter rho."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpectralBounds:
    lambda_min_lb: float
    lambda_max_ub: float
    lambda_min_est: float | None = None
    lambda_max_est: float | None = None
    converged: bool = False

    @property
    def norm_ub(self) -> float:
        """Upper bound on the spectral norm of a symmetric matrix."""
        return max(abs(self.lambda_min_lb), abs(self.lambda_max_ub))


def gershgorin_bounds(Q) -> SpectralBounds:
    Q = np.asarray(Q, dtype=float)
    d = np.diag(Q)
    radius = np.sum(np.abs(Q), axis=1) - np.abs(d)
    return SpectralBounds(float(np.min(d - radius)), float(np.max(d + radius)))


def _start_vector(n):
    # All-ones is an eigenvector of many structured matrices (e.g. [[0,2],[2,0]]),
    # which would hide the other end of the spectrum; tilt it deterministically.
    v = 1.0 + 0.5 * np.sin(np.arange(1, n + 1))
    return v / np.linalg.norm(v)


def _dominant(B, tol, max_iter):
    v = _start_vector(B.shape[0])
    theta = float(v @ B @ v)
    for _ in range(max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, True
        v = w / nw
        new = float(v @ B @ v)
        if abs(new - theta) <= tol * max(1.0, abs(new)):
            return new, True
        theta = new
    return theta, False


def power_iteration_extremes(Q, tol=1e-10, max_iter=100_000) -> SpectralBounds:
    """Gershgorin bounds refined by power iteration on the two shifted matrices.

    lambda_max comes from Q - lb*I and lambda_min from ub*I - Q, both positive
    semidefinite. If either run does not settle within ``max_iter`` the
    estimates fall back to the bounds and ``converged`` is False.
    """
    Q = np.asarray(Q, dtype=float)
    g = gershgorin_bounds(Q)
    lb, ub = g.lambda_min_lb, g.lambda_max_ub
    n = Q.shape[0]
    top, ok_top = _dominant(Q - lb * np.eye(n), tol, max_iter)
    bottom, ok_bottom = _dominant(ub * np.eye(n) - Q, tol, max_iter)
    if not (ok_top and ok_bottom):
        return SpectralBounds(lb, ub, lb, ub, converged=False)
    lmax = min(max(lb + top, lb), ub)
    lmin = min(max(ub - bottom, lb), lmax)
    return SpectralBounds(lb, ub, lmin, lmax, converged=True)


def default_margin(bound: float) -> float:
    return 1e-3 * (1.0 + abs(bound))


def choose_rho(Q, scheme: str, margin: float | None = None) -> float:
    """A certified rho: > lambda_max(Q) for scheme A, > -lambda_min(Q) for scheme B."""
    g = gershgorin_bounds(Q)
    scheme = scheme.upper()
    if scheme == "A":
        bound = g.lambda_max_ub
    elif scheme == "B":
        bound = -g.lambda_min_lb
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if margin is None:
        margin = default_margin(bound)
    if not margin > 0:
        raise ValueError("margin must be positive")
    return max(bound, 0.0) + margin


def rho_is_certified(Q, scheme: str, rho: float) -> bool:
    g = gershgorin_bounds(Q)
    if scheme.upper() == "A":
        return rho > 0 and rho > g.lambda_max_ub
    return rho > 0 and rho > -g.lambda_min_lb


def operator_norm_ub(M) -> float:
    """Upper bound on |M|_2; Gershgorin for symmetric M, sqrt(|M|_1 |M|_inf) otherwise."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if np.array_equal(M, M.T):
        return gershgorin_bounds(M).norm_ub
    return float(np.sqrt(np.linalg.norm(M, 1) * np.linalg.norm(M, np.inf)))
