"""Compiled inner loops: projections, the strongly convex subproblem, fixed-step RK4.

Constraint sets travel as the tuple returned by ``ConstraintSet.packed()``:
``(kind, mat, v1, v2, rad)`` with

    box            mat unused, v1 = lo, v2 = hi
    ball           mat unused, v1 = center, rad = radius
    polyhedron     mat = A, v1 = b, v2 = stored feasible point
    unit interval  mat unused, v1 = [-1], v2 = [1]
"""

import math

import numpy as np
from numba import njit

BOX, BALL, POLYHEDRON, UNIT_INTERVAL = 0, 1, 2, 3
SYSTEM_A, SYSTEM_B = 0, 1

# status codes
OK = 0
CYCLE_GUARD = 1
FC_MAX_ITER = 2
NONFINITE = 3


@njit(cache=True)
def _norm(v):
    s = 0.0
    for i in range(v.shape[0]):
        s += v[i] * v[i]
    return math.sqrt(s)


@njit(cache=True)
def _cholesky_solve(G, rhs, k, out):
    # G is k x k SPD (leading block); overwritten with its factor.
    for j in range(k):
        d = G[j, j]
        for p in range(j):
            d -= G[j, p] * G[j, p]
        if d <= 0.0:
            return False
        d = math.sqrt(d)
        G[j, j] = d
        for i in range(j + 1, k):
            s = G[i, j]
            for p in range(j):
                s -= G[i, p] * G[j, p]
            G[i, j] = s / d
    for i in range(k):
        s = rhs[i]
        for p in range(i):
            s -= G[i, p] * out[p]
        out[i] = s / G[i, i]
    for i in range(k - 1, -1, -1):
        s = out[i]
        for p in range(i + 1, k):
            s -= G[p, i] * out[p]
        out[i] = s / G[i, i]
    return True


@njit(cache=True)
def project_polyhedron(A, b, xf, u, x, active, lam_out):
    """Primal active-set projection of u onto {A x <= b}, started at xf.

    Writes the projection to ``x``, the final working set to ``active`` and the
    constraint multipliers to ``lam_out``. Returns the iteration count, or -1
    if the cycle guard trips.
    """
    m, n = A.shape
    for i in range(n):
        x[i] = xf[i]
    for i in range(m):
        active[i] = False
        lam_out[i] = 0.0
    W = np.empty(n + 1, np.int64)
    nw = 0
    G = np.empty((n + 1, n + 1))
    rhs = np.empty(n + 1)
    lam = np.zeros(n + 1)
    g = np.empty(n)
    p = np.empty(n)
    rownorm = np.empty(m)
    for i in range(m):
        rownorm[i] = _norm(A[i])
    scale = 1.0 + _norm(u) + _norm(xf)
    ptol = 1e-13 * scale
    max_it = 10 * (m + n) + 50
    for it in range(max_it):
        for i in range(n):
            g[i] = u[i] - x[i]
        if nw > 0:
            for a in range(nw):
                ra = A[W[a]]
                for c in range(a + 1):
                    rc = A[W[c]]
                    s = 0.0
                    for i in range(n):
                        s += ra[i] * rc[i]
                    G[a, c] = s
                    G[c, a] = s
                s = 0.0
                for i in range(n):
                    s += ra[i] * g[i]
                rhs[a] = s
            if not _cholesky_solve(G, rhs, nw, lam):
                return -1
        for i in range(n):
            p[i] = g[i]
        for a in range(nw):
            ra = A[W[a]]
            for i in range(n):
                p[i] -= lam[a] * ra[i]
        pn = _norm(p)
        if pn <= ptol:
            # x - u + A_W' lam = 0: lam are the multipliers; drop by lowest index
            drop = -1
            best = m
            for a in range(nw):
                if lam[a] < -1e-12 * scale and W[a] < best:
                    best = W[a]
                    drop = a
            if drop < 0:
                for a in range(nw):
                    lam_out[W[a]] = lam[a]
                return it + 1
            active[W[drop]] = False
            for a in range(drop, nw - 1):
                W[a] = W[a + 1]
            nw -= 1
            continue
        step = 1.0
        block = -1
        for i in range(m):
            if active[i]:
                continue
            ap = 0.0
            ax = 0.0
            for j in range(n):
                ap += A[i, j] * p[j]
                ax += A[i, j] * x[j]
            if ap > 1e-14 * rownorm[i] * pn:
                slack = b[i] - ax
                if slack < 0.0:
                    slack = 0.0
                r = slack / ap
                if r < step:
                    step = r
                    block = i
        for j in range(n):
            x[j] += step * p[j]
        if block >= 0:
            W[nw] = block
            nw += 1
            active[block] = True
    return -1


@njit(cache=True)
def project(kind, mat, v1, v2, rad, u, out):
    """Metric projection of u onto the packed set; returns a status code."""
    n = u.shape[0]
    if kind == BOX or kind == UNIT_INTERVAL:
        for i in range(n):
            v = u[i]
            if v < v1[i]:
                v = v1[i]
            elif v > v2[i]:
                v = v2[i]
            out[i] = v
        return OK
    if kind == BALL:
        d = 0.0
        for i in range(n):
            d += (u[i] - v1[i]) ** 2
        d = math.sqrt(d)
        if d > rad:
            f = rad / d
            for i in range(n):
                out[i] = v1[i] + f * (u[i] - v1[i])
        else:
            for i in range(n):
                out[i] = u[i]
        return OK
    m = mat.shape[0]
    active = np.empty(m, np.bool_)
    lam = np.empty(m)
    if project_polyhedron(mat, v1, v2, u, out, active, lam) < 0:
        return CYCLE_GUARD
    return OK


@njit(cache=True)
def distance(kind, mat, v1, v2, rad, x, work):
    project(kind, mat, v1, v2, rad, x, work)
    s = 0.0
    for i in range(x.shape[0]):
        s += (x[i] - work[i]) ** 2
    return math.sqrt(s)


@njit(cache=True)
def solve_fc(Q, q, kind, mat, v1, v2, rad, rho, u, x_init, step, tol, max_iter, out):
    """Projected gradient for argmin_C 1/2 x'Qx + q'x + rho/2 |x - u|^2.

    Returns the iteration count (negative on failure: -1 max_iter, -2 projection).
    """
    n = u.shape[0]
    x = x_init.copy()
    y = np.empty(n)
    xn = np.empty(n)
    for it in range(max_iter):
        for i in range(n):
            s = q[i] + rho * (x[i] - u[i])
            for j in range(n):
                s += Q[i, j] * x[j]
            y[i] = x[i] - step * s
        if project(kind, mat, v1, v2, rad, y, xn) != OK:
            return -2
        d = 0.0
        for i in range(n):
            d += (xn[i] - x[i]) ** 2
            x[i] = xn[i]
        if math.sqrt(d) <= tol:
            for i in range(n):
                out[i] = x[i]
            return it + 1
    for i in range(n):
        out[i] = x[i]
    return -1


@njit(cache=True)
def field(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol, fc_max_iter,
          x, out, work, fc_prev):
    """Right-hand side of system A or B at x. ``fc_prev`` warm-starts system B."""
    n = x.shape[0]
    if system == SYSTEM_A:
        for i in range(n):
            s = q[i]
            for j in range(n):
                s += Q[i, j] * x[j]
            work[i] = x[i] - s / rho
        if project(kind, mat, v1, v2, rad, work, out) != OK:
            return CYCLE_GUARD
    else:
        it = solve_fc(Q, q, kind, mat, v1, v2, rad, rho, x, fc_prev, fc_step, fc_tol,
                      fc_max_iter, out)
        if it == -2:
            return CYCLE_GUARD
        if it < 0:
            return FC_MAX_ITER
        for i in range(n):
            fc_prev[i] = out[i]
    for i in range(n):
        out[i] = (out[i] - x[i]) / eta
    return OK


@njit(cache=True)
def field_batch(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol,
                fc_max_iter, X, out):
    k, n = X.shape
    work = np.empty(n)
    fc = np.empty(n)
    for r in range(k):
        if system == SYSTEM_B:
            project(kind, mat, v1, v2, rad, X[r], fc)
        status = field(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol,
                       fc_max_iter, X[r], out[r], work, fc)
        if status != OK:
            return status
    return OK


@njit(cache=True)
def rk4(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol, fc_max_iter,
        x0, h, nsteps, T, stride):
    """Classical RK4 with fixed step h on [0, T]; the state is never projected.

    Every accepted state's distance to C is measured. Samples are taken every
    ``stride`` steps plus the final step. Returns
    (times, points, dists, max_dist, steps_done, status).
    """
    n = x0.shape[0]
    nsamples = nsteps // stride + 2
    times = np.empty(nsamples)
    pts = np.empty((nsamples, n))
    dists = np.empty(nsamples)
    x = x0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    work = np.empty(n)
    fc = np.empty(n)
    project(kind, mat, v1, v2, rad, x0, fc)
    d = distance(kind, mat, v1, v2, rad, x, work)
    times[0] = 0.0
    pts[0] = x
    dists[0] = d
    max_dist = d
    ns = 1
    t = 0.0
    for k in range(1, nsteps + 1):
        t_next = k * h
        if k == nsteps:
            t_next = T
        hk = t_next - t
        st = field(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol,
                   fc_max_iter, x, k1, work, fc)
        if st != OK:
            return times[:ns], pts[:ns], dists[:ns], max_dist, k - 1, st
        for i in range(n):
            tmp[i] = x[i] + 0.5 * hk * k1[i]
        st = field(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol,
                   fc_max_iter, tmp, k2, work, fc)
        if st != OK:
            return times[:ns], pts[:ns], dists[:ns], max_dist, k - 1, st
        for i in range(n):
            tmp[i] = x[i] + 0.5 * hk * k2[i]
        st = field(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol,
                   fc_max_iter, tmp, k3, work, fc)
        if st != OK:
            return times[:ns], pts[:ns], dists[:ns], max_dist, k - 1, st
        for i in range(n):
            tmp[i] = x[i] + hk * k3[i]
        st = field(system, Q, q, kind, mat, v1, v2, rad, rho, eta, fc_step, fc_tol,
                   fc_max_iter, tmp, k4, work, fc)
        if st != OK:
            return times[:ns], pts[:ns], dists[:ns], max_dist, k - 1, st
        finite = True
        for i in range(n):
            x[i] += hk / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not math.isfinite(x[i]):
                finite = False
        if not finite:
            return times[:ns], pts[:ns], dists[:ns], max_dist, k - 1, NONFINITE
        t = t_next
        d = distance(kind, mat, v1, v2, rad, x, work)
        if d > max_dist:
            max_dist = d
        if k % stride == 0 or k == nsteps:
            times[ns] = t
            pts[ns] = x
            dists[ns] = d
            ns += 1
    return times[:ns], pts[:ns], dists[:ns], max_dist, nsteps, OK


@njit(cache=True)
def max_pairwise_ratio(X, F):
    """max over i < j of |F_i - F_j| / |X_i - X_j|, skipping coincident points."""
    k, n = X.shape
    best = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            dx = 0.0
            df = 0.0
            for c in range(n):
                a = X[i, c] - X[j, c]
                b = F[i, c] - F[j, c]
                dx += a * a
                df += b * b
            if dx > 0.0:
                r = math.sqrt(df / dx)
                if r > best:
                    best = r
    return best
