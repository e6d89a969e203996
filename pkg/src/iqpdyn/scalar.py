"""The one-dimensional family F(x) = alpha x + beta on [-1, 1].

Exact classification of strong pseudomonotonicity, grid falsifiers, the KKT
set of min 1/2 alpha x^2 + beta x over [-1, 1], and a closed-form engine for
the projected flow x' = (P(x - F(x)/rho) - x)/eta.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import QuadraticProblem, UnitInterval

GAMMA_PAIR_GAP = 1e-9
KKT_TOL = 1e-12
MAX_SWITCHES = 1000


class AdvisoryWarning(UserWarning):
    """Result computed outside the hypotheses under which it is guaranteed."""


class SwitchLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScalarProblem:
    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("alpha and beta must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def F(self, x):
        return self.alpha * x + self.beta

    def objective(self, x):
        return 0.5 * self.alpha * x * x + self.beta * x

    def to_problem(self) -> QuadraticProblem:
        return QuadraticProblem([[self.alpha]], [self.beta], UnitInterval())


def _sp(sp_or_alpha, beta=None) -> ScalarProblem:
    if isinstance(sp_or_alpha, ScalarProblem):
        return sp_or_alpha
    return ScalarProblem(sp_or_alpha, beta)


# classification ---------------------------------------------------------------

STRONGLY_MONOTONE = "strongly_monotone"
STRONGLY_PSEUDOMONOTONE = "strongly_pseudomonotone"
NOT_PSEUDOMONOTONE = "not_pseudomonotone"
IDENTICALLY_ZERO = "identically_zero"


@dataclass(frozen=True)
class SpmVerdict:
    kind: str
    gamma: float | None = None
    witness: tuple[float, float] | None = None
    in_cone: bool = False

    @property
    def is_spm(self) -> bool:
        return self.kind in (STRONGLY_MONOTONE, STRONGLY_PSEUDOMONOTONE)

    def __str__(self):
        if self.gamma is not None:
            return f"{self.kind} gamma={self.gamma:g}"
        if self.witness is not None:
            return f"{self.kind} witness=({self.witness[0]:g},{self.witness[1]:g})"
        return self.kind


def in_cone(alpha: float, beta: float) -> bool:
    return bool(alpha + beta > 0 or alpha - beta > 0)


def classify_spm(sp_or_alpha, beta=None) -> SpmVerdict:
    """Exact strong-pseudomonotonicity verdict for F(x) = alpha x + beta on [-1, 1].

    Positive verdicts carry a modulus gamma, negative ones a pair (x, y) with
    F(x)(y - x) >= 0 and F(y)(y - x) <= 0.
    """
    sp = _sp(sp_or_alpha, beta)
    a, b = sp.alpha, sp.beta
    cone = in_cone(a, b)
    if a == 0 and b == 0:
        return SpmVerdict(IDENTICALLY_ZERO, in_cone=cone)
    if a == 0:
        return SpmVerdict(STRONGLY_PSEUDOMONOTONE, abs(b) / 2, in_cone=cone)
    if a > 0:
        return SpmVerdict(STRONGLY_MONOTONE, a, in_cone=cone)
    if b == 0:
        return SpmVerdict(NOT_PSEUDOMONOTONE, witness=(-1.0, 1.0), in_cone=cone)
    if b > 0:
        if a + b > 0:
            return SpmVerdict(STRONGLY_PSEUDOMONOTONE, (a + b) / 2, in_cone=cone)
        if a + b < 0:
            # F vanishes at -b/a inside (0, 1) and is negative at 1
            return SpmVerdict(NOT_PSEUDOMONOTONE, witness=(-b / a, 1.0), in_cone=cone)
        return SpmVerdict(NOT_PSEUDOMONOTONE, witness=(1.0, -1.0), in_cone=cone)
    if a > b:
        return SpmVerdict(STRONGLY_PSEUDOMONOTONE, (a - b) / 2, in_cone=cone)
    return SpmVerdict(NOT_PSEUDOMONOTONE, witness=(-b / a, 1.0), in_cone=cone)


def is_witness(alpha: float, beta: float, x: float, y: float) -> bool:
    """F(x)(y - x) >= 0 and F(y)(y - x) <= 0 with y != x."""
    if x == y:
        return False
    d = y - x
    return bool((alpha * x + beta) * d >= 0 and (alpha * y + beta) * d <= 0)


# grid falsifier ---------------------------------------------------------------


def uniform_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """n equispaced nodes with both endpoints exact (and 0 exact for symmetric ranges)."""
    if n < 2:
        raise ValueError("need at least two nodes")
    i = np.arange(n, dtype=float)
    g = lo + (hi - lo) * i / (n - 1)
    g[-1] = hi
    return g


@njit(cache=True)
def _first_witness(alpha, beta, grid):
    # a pair violates iff some node a has F(a) >= 0 and a later node b has F(b) <= 0
    n = grid.shape[0]
    first = -1
    for i in range(n):
        if alpha * grid[i] + beta >= 0.0:
            first = i
            break
    if first < 0:
        return -1, -1
    for j in range(first + 1, n):
        if alpha * grid[j] + beta <= 0.0:
            return first, j
    return -1, -1


@njit(cache=True)
def _falsifier_grid(alphas, betas, grid, out):
    for i in range(alphas.shape[0]):
        for j in range(betas.shape[0]):
            a, b = _first_witness(alphas[i], betas[j], grid)
            out[i, j] = a >= 0


@njit(cache=True)
def _gamma_min(alpha, beta, grid, gap):
    best = np.inf
    n = grid.shape[0]
    for i in range(n):
        x = grid[i]
        fx = alpha * x + beta
        for j in range(n):
            y = grid[j]
            d = y - x
            if abs(d) < gap or fx * d < 0.0:
                continue
            r = (alpha * y + beta) * d / (d * d)
            if r < best:
                best = r
    return best


def falsify_spm(alpha: float, beta: float, grid_n: int, interval=(-1.0, 1.0)):
    """First grid pair (x, y), x < y, refuting strong pseudomonotonicity; None if there is none.

    The pair satisfies F(x)(y - x) >= 0 and F(y)(y - x) <= 0. Any violating pair,
    in either order, exists exactly when such an ordered one does.
    """
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    grid = uniform_grid(float(interval[0]), float(interval[1]), grid_n)
    a, b = _first_witness(float(alpha), float(beta), grid)
    if a < 0:
        return None
    return float(grid[a]), float(grid[b])


def falsify_spm_pairwise(alpha: float, beta: float, grid_n: int, interval=(-1.0, 1.0)):
    """Reference scan over every ordered pair; slow, for cross-checking."""
    grid = uniform_grid(float(interval[0]), float(interval[1]), grid_n)
    F = alpha * grid + beta
    D = grid[None, :] - grid[:, None]
    hit = (F[:, None] * D >= 0) & (F[None, :] * D <= 0) & (D != 0)
    idx = np.argwhere(hit)
    if len(idx) == 0:
        return None
    i, j = idx[0]
    return float(grid[i]), float(grid[j])


def estimate_gamma(alpha: float, beta: float, grid_n: int, interval=(-1.0, 1.0)) -> float:
    """Smallest F(y)(y - x)/(y - x)^2 over grid pairs with F(x)(y - x) >= 0.

    Pairs closer than 1e-9 are skipped. The result is clipped at 0 and is
    +inf when no pair satisfies the premise.
    """
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    grid = uniform_grid(float(interval[0]), float(interval[1]), grid_n)
    g = _gamma_min(float(alpha), float(beta), grid, GAMMA_PAIR_GAP)
    return max(float(g), 0.0)


def falsifier_map(alphas, betas, grid_n: int) -> np.ndarray:
    """Boolean array [i, j]: the grid falsifier finds a witness for (alphas[i], betas[j])."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    out = np.zeros((alphas.shape[0], betas.shape[0]), dtype=bool)
    _falsifier_grid(alphas, betas, uniform_grid(-1.0, 1.0, grid_n), out)
    return out


@dataclass(frozen=True, eq=False)
class ConeMap:
    alphas: np.ndarray
    betas: np.ndarray
    member: np.ndarray

    def rows(self):
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.betas):
                yield float(a), float(b), bool(self.member[i, j])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "beta", "in_cone"])
            for a, b, m in self.rows():
                w.writerow([repr(a), repr(b), "true" if m else "false"])


def cone_membership_map(alpha_range, beta_range, resolution: int) -> ConeMap:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    for lo, hi in (alpha_range, beta_range):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("ranges must be finite")
    alphas = uniform_grid(float(alpha_range[0]), float(alpha_range[1]), resolution)
    betas = uniform_grid(float(beta_range[0]), float(beta_range[1]), resolution)
    A = alphas[:, None]
    B = betas[None, :]
    return ConeMap(alphas, betas, (A + B > 0) | (A - B > 0))


# KKT set ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarKktSet:
    points: tuple[float, ...]
    whole_interval: bool = False

    def contains(self, x: float, tol: float = KKT_TOL) -> bool:
        if self.whole_interval:
            return -1.0 - tol <= x <= 1.0 + tol
        return any(abs(x - p) <= tol for p in self.points)


def scalar_kkt_set(sp_or_alpha, beta=None) -> ScalarKktSet:
    """Points x of [-1, 1] with (alpha x + beta)(y - x) >= 0 for every y in [-1, 1]."""
    sp = _sp(sp_or_alpha, beta)
    a, b = sp.alpha, sp.beta
    if a == 0 and b == 0:
        return ScalarKktSet((), whole_interval=True)
    pts = set()
    if b >= a:
        pts.add(-1.0)
    if a + b <= 0:
        pts.add(1.0)
    if a != 0 and -1.0 <= -b / a <= 1.0:
        pts.add(-b / a + 0.0)
    return ScalarKktSet(tuple(sorted(pts)))


# exact trajectories -----------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """x(t) on [t_start, t_end) in one region.

    exponential: x = (x_start - target) exp(-rate (t - t_start)) + target
    linear:      x = x_start + slope (t - t_start)
    """

    t_start: float
    t_end: float
    region: str
    x_start: float
    target: float | None = None
    rate: float = 0.0
    slope: float = 0.0

    def __call__(self, t: float) -> float:
        tau = t - self.t_start
        if self.target is None:
            return self.x_start + self.slope * tau
        if self.x_start == self.target:
            return self.x_start
        # expm1 form: no cancellation when the target is far away (small |alpha|)
        return self.x_start + (self.x_start - self.target) * math.expm1(-self.rate * tau)

    @property
    def stationary(self) -> bool:
        if self.target is None:
            return self.slope == 0
        return self.x_start == self.target or self.rate == 0


@dataclass(frozen=True)
class ExactTrajectory:
    problem: ScalarProblem
    rho: float
    eta: float
    x0: float
    segments: tuple[Segment, ...]
    limit: float
    horizon: float = math.inf
    mu: tuple[float, float] | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def final_region(self) -> str:
        return self.segments[-1].region

    @property
    def switches(self) -> int:
        return len(self.segments) - 1

    def structure(self) -> tuple[str, ...]:
        return tuple(s.region for s in self.segments)

    def evaluate(self, t):
        """x(t); accepts a scalar or an array of times."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.array([s.t_start for s in self.segments])
        idx = np.searchsorted(starts, ts, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        out = np.array([self.segments[k](tt) for k, tt in zip(idx, ts)])
        return float(out[0]) if np.ndim(t) == 0 else out

    def settle_time(self, tol: float) -> float:
        """A time after which |x(t) - limit| <= tol holds for good."""
        last = self.segments[-1]
        if last.stationary or last.t_end < math.inf:
            return last.t_start
        gap = abs(last.x_start - self.limit)
        if gap <= tol:
            return last.t_start
        return last.t_start + math.log(gap / tol) / last.rate

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_start", "t_end", "region", "limit"])
            for s in self.segments:
                w.writerow([repr(s.t_start), "inf" if math.isinf(s.t_end) else repr(s.t_end),
                            s.region, repr(self.limit)])


class _Flow:
    """Region logic and closed forms of the piecewise field."""

    def __init__(self, sp: ScalarProblem, rho: float, eta: float, scaled: bool):
        self.a, self.b = sp.alpha, sp.beta
        self.rho, self.eta = rho, eta
        self.d = rho - self.a
        self.lower_c = self.b - rho
        self.upper_c = self.b + rho
        self.scaled = scaled or self.d == 0
        if self.d != 0:
            self.mu1 = self.lower_c / self.d
            self.mu2 = self.upper_c / self.d

    def region(self, x: float) -> str:
        if self.scaled:
            s = self.d * x
            if s < self.lower_c:
                return "L"
            if s > self.upper_c:
                return "R"
            return "M"
        # same test phrased through mu1, mu2; the order of the two flips with the sign of rho - alpha
        if self.d > 0:
            return "L" if x < self.mu1 else "R" if x > self.mu2 else "M"
        return "L" if x > self.mu1 else "R" if x < self.mu2 else "M"

    def on_boundary(self, x: float):
        if self.d == 0:
            return None
        if self.scaled:
            s = self.d * x
            if s == self.lower_c:
                return "lower"
            if s == self.upper_c:
                return "upper"
            return None
        if x == self.mu1:
            return "lower"
        if x == self.mu2:
            return "upper"
        return None

    def m_outward(self, x: float, side: str) -> bool:
        # sign of d/dt (rho - alpha) x under the middle-region field
        ds = self.d * -(self.a * x + self.b)
        return ds < 0 if side == "lower" else ds > 0

    def segment(self, t: float, x: float, region: str) -> Segment:
        if region == "L":
            return Segment(t, math.inf, "L", x, -1.0, 1.0 / self.eta)
        if region == "R":
            return Segment(t, math.inf, "R", x, 1.0, 1.0 / self.eta)
        target = -self.b / self.a if self.a != 0 else math.inf
        if math.isfinite(target):
            return Segment(t, math.inf, "M", x, target, self.a / (self.eta * self.rho))
        # alpha == 0, or so small that -beta/alpha overflows: the line is exact to within alpha
        return Segment(t, math.inf, "M", x, None, 0.0, -self.b / (self.eta * self.rho))

    def boundary_x(self, side: str) -> float:
        return (self.lower_c if side == "lower" else self.upper_c) / self.d

    def crossing(self, seg: Segment, side: str) -> float:
        """Time after seg.t_start at which seg reaches the given boundary, or inf."""
        xb = self.boundary_x(side)
        if seg.stationary:
            return math.inf
        gap = xb - seg.x_start
        if gap == 0:
            return math.inf
        if seg.target is None:
            if gap * seg.slope <= 0:
                return math.inf
            tau = gap / seg.slope
        else:
            # x - x_start = (x_start - target) expm1(-rate tau); solve for the fraction u
            u = gap / (seg.target - seg.x_start)
            if not (u < 1 and u / seg.rate > 0):
                return math.inf
            tau = -math.log1p(-u) / seg.rate
        # a crossing that underflows to zero is still a crossing
        return max(tau, 0.0) if math.isfinite(tau) else math.inf


def _sides(region: str):
    return {"L": ("lower",), "R": ("upper",), "M": ("lower", "upper")}[region]


def exact_trajectory(sp_or_alpha, rho: float, eta: float, x0: float, T: float = math.inf,
                     *, beta=None, scaled_regions: bool = True) -> ExactTrajectory:
    """Closed-form solution of x' = (P(x - (alpha x + beta)/rho) - x)/eta on [-1, 1].

    Regions are L: (rho - alpha) x < beta - rho, R: (rho - alpha) x > beta + rho,
    and M in between, boundaries included. Within a region the solution is
    an exponential toward -1, 1 or -beta/alpha (a line when alpha = 0), and
    switching times come from solving that closed form for the boundary. The
    region is carried across a switch rather than re-tested, so rounding at
    the boundary cannot send the state back. A start on a boundary whose
    middle-region velocity points outward leaves M at once, and that
    zero-length piece is not recorded.

    ``scaled_regions=False`` tests regions against mu1, mu2 instead; it exists
    to check that both formulations give the same segment structure.
    """
    sp = ScalarProblem(sp_or_alpha, beta) if beta is not None else _sp(sp_or_alpha)
    if not (rho > 0 and eta > 0 and T > 0):
        raise ValueError("rho, eta and T must be positive")
    x0 = float(x0)
    if not -1.0 <= x0 <= 1.0:
        raise ValueError("x0 must lie in [-1, 1]")
    flow = _Flow(sp, float(rho), float(eta), scaled_regions)
    region = flow.region(x0)
    entry = None
    notes = []
    if region == "M":
        side = flow.on_boundary(x0)
        if side is not None:
            if flow.m_outward(x0, side):
                region = "L" if side == "lower" else "R"
                notes.append(f"left M at t=0 through the {side} boundary")
            entry = side

    segments = []
    t, x = 0.0, x0
    while True:
        seg = flow.segment(t, x, region)
        best, best_side = math.inf, None
        if flow.d != 0:
            for side in _sides(region):
                if side == entry:
                    continue
                tau = flow.crossing(seg, side)
                if tau < best:
                    best, best_side = tau, side
        if best_side is None:
            segments.append(seg)
            break
        t_end = t + best
        segments.append(Segment(seg.t_start, t_end, seg.region, seg.x_start, seg.target,
                                seg.rate, seg.slope))
        if len(segments) > MAX_SWITCHES:
            raise SwitchLimitError(f"more than {MAX_SWITCHES} region switches")
        x = flow.boundary_x(best_side)
        t = t_end
        entry = best_side
        region = "M" if region != "M" else ("L" if best_side == "lower" else "R")

    last = segments[-1]
    if last.stationary:
        limit = last.x_start
    elif last.target is not None and last.rate > 0:
        limit = last.target
    else:
        raise SwitchLimitError("trajectory leaves every region without settling")

    if math.isfinite(T):
        segments = [s for s in segments if s.t_start < T]
        s = segments[-1]
        if s.t_end > T:
            segments[-1] = Segment(s.t_start, T, s.region, s.x_start, s.target, s.rate, s.slope)
    mu = (flow.mu1, flow.mu2) if flow.d != 0 else None
    return ExactTrajectory(sp, float(rho), float(eta), x0, tuple(segments),
                           float(limit), float(T), mu, tuple(notes))


def theorem_hypotheses_hold(sp: ScalarProblem, rho: float) -> bool:
    """alpha <= 0, or alpha > 0 with rho >= alpha."""
    return sp.alpha <= 0 or rho >= sp.alpha


def trajectory_limit_is_kkt(sp_or_alpha, rho: float, eta: float, x0: float, *, beta=None) -> bool:
    sp = ScalarProblem(sp_or_alpha, beta) if beta is not None else _sp(sp_or_alpha)
    if not theorem_hypotheses_hold(sp, rho):
        warnings.warn(
            f"rho={rho} < alpha={sp.alpha}: the limit is computed but carries no guarantee",
            AdvisoryWarning, stacklevel=2)
    traj = exact_trajectory(sp, rho, eta, x0)
    return scalar_kkt_set(sp).contains(traj.limit)
