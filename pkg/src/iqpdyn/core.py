"""Problem data, constraint sets, solver configuration and file I/O."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

SYMMETRY_TOL = 1e-12
MEMBERSHIP_TOL = 1e-10


class InvariantError(ValueError):
    """Raised when problem data violates a construction invariant."""


class DimensionError(ValueError):
    pass


class PreconditionError(ValueError):
    """Raised when a solver precondition (e.g. a certified rho) does not hold."""


class ConvergenceError(RuntimeError):
    pass


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvariantError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


# constraint sets --------------------------------------------------------------

BOX, BALL, POLYHEDRON, UNIT_INTERVAL = 0, 1, 2, 3
_EMPTY_MAT = np.zeros((0, 0))
_EMPTY_MAT.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    kind = "box"

    def __post_init__(self):
        lo = _frozen(self.lo, 1, "lo")
        hi = _frozen(self.hi, 1, "hi")
        if lo.shape != hi.shape:
            raise DimensionError("lo and hi must have the same length")
        if np.any(lo > hi):
            raise InvariantError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def reference_point(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def to_dict(self) -> dict:
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def packed(self):
        return BOX, _EMPTY_MAT, self.lo, self.hi, 0.0


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center, 1, "center"))
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise InvariantError("ball radius must be a positive finite number")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)

    def reference_point(self) -> np.ndarray:
        return self.center.copy()

    def to_dict(self) -> dict:
        return {"type": "ball", "a": self.center.tolist(), "r": self.radius}

    def packed(self):
        return BALL, _EMPTY_MAT, self.center, self.center, self.radius


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """The set {x : A x <= b}, certified nonempty by ``feasible_point``."""

    A: np.ndarray
    b: np.ndarray
    feasible_point: np.ndarray

    kind = "polyhedron"

    def __post_init__(self):
        A = _frozen(self.A, 2, "A")
        b = _frozen(self.b, 1, "b")
        xf = _frozen(self.feasible_point, 1, "feasible_point")
        if A.shape[0] != b.shape[0]:
            raise DimensionError("A and b row counts differ")
        if A.shape[1] != xf.shape[0]:
            raise DimensionError("feasible_point length does not match A")
        if np.any(A @ xf - b > MEMBERSHIP_TOL):
            raise InvariantError("feasible_point violates A x <= b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "feasible_point", xf)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x - self.b <= tol))

    def reference_point(self) -> np.ndarray:
        return self.feasible_point.copy()

    def to_dict(self) -> dict:
        return {
            "type": "polyhedron",
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "feasible_point": self.feasible_point.tolist(),
        }

    def packed(self):
        return POLYHEDRON, self.A, self.b, self.feasible_point, 0.0


_UNIT_BOUNDS = np.array([-1.0, 1.0])
_UNIT_BOUNDS.setflags(write=False)


@dataclass(frozen=True)
class UnitInterval:
    """The segment [-1, 1] in dimension one."""

    kind = "unit_interval"

    @property
    def dim(self) -> int:
        return 1

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return x.shape == (1,) and bool(-1.0 - tol <= x[0] <= 1.0 + tol)

    def reference_point(self) -> np.ndarray:
        return np.zeros(1)

    def to_dict(self) -> dict:
        return {"type": "unit_interval"}

    def packed(self):
        return UNIT_INTERVAL, _EMPTY_MAT, _UNIT_BOUNDS[:1], _UNIT_BOUNDS[1:], 0.0


ConstraintSet = Union[Box, Ball, Polyhedron, UnitInterval]


def constraint_from_dict(d: dict) -> ConstraintSet:
    kind = d.get("type")
    if kind == "box":
        return Box(d["lo"], d["hi"])
    if kind == "ball":
        return Ball(d["a"], d["r"])
    if kind == "polyhedron":
        if "feasible_point" not in d:
            raise InvariantError("polyhedron requires a feasible_point certificate")
        return Polyhedron(d["A"], d["b"], d["feasible_point"])
    if kind == "unit_interval":
        return UnitInterval()
    raise ValueError(f"unknown constraint set type {kind!r}")


# problems ---------------------------------------------------------------------


def _check_square(M, q, C, name):
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")
    if q.shape[0] != M.shape[0]:
        raise DimensionError(f"q has length {q.shape[0]}, expected {M.shape[0]}")
    if C.dim != M.shape[0]:
        raise DimensionError(f"constraint set has dimension {C.dim}, expected {M.shape[0]}")


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """min 1/2 x'Qx + q'x over a closed convex set C, with Q symmetric."""

    Q: np.ndarray
    q: np.ndarray
    C: ConstraintSet

    def __post_init__(self):
        Q = _frozen(self.Q, 2, "Q")
        q = _frozen(self.q, 1, "q")
        _check_square(Q, q, self.C, "Q")
        asym = float(np.max(np.abs(Q - Q.T))) if Q.size else 0.0
        if asym > SYMMETRY_TOL:
            raise InvariantError(f"Q is not symmetric (max |Q - Q'| = {asym:.3e})")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def M(self) -> np.ndarray:
        return self.Q

    def objective(self, x) -> float:
        return objective_value(self, x)


@dataclass(frozen=True, eq=False)
class AviProblem:
    """Find x in C with <Mx + q, y - x> >= 0 for all y in C; M need not be symmetric."""

    M: np.ndarray
    q: np.ndarray
    C: ConstraintSet

    def __post_init__(self):
        M = _frozen(self.M, 2, "M")
        q = _frozen(self.q, 1, "q")
        _check_square(M, q, self.C, "M")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.shape[0]


Problem = Union[QuadraticProblem, AviProblem]


def objective_value(p: QuadraticProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({p.n},)")
    return float(0.5 * x @ p.Q @ x + p.q @ x)


# solver configuration and traces ----------------------------------------------


class Termination(str, enum.Enum):
    RESIDUAL_TOL = "residual_tol"
    MAX_ITER = "max_iter"
    MAX_TIME = "max_time"
    DIVERGENCE_GUARD = "divergence_guard"


@dataclass(frozen=True)
class SolverConfig:
    rho: float
    eta: float = 1.0
    h: float = 1e-3
    residual_tol: float = 1e-8
    max_iter: int = 100_000
    T: float = 50.0

    def __post_init__(self):
        for name in ("rho", "eta", "h", "residual_tol", "max_iter", "T"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvariantError(f"SolverConfig.{name} must be strictly positive, got {value}")
        if int(self.max_iter) != self.max_iter:
            raise InvariantError("SolverConfig.max_iter must be an integer")


@dataclass
class SolveTrace:
    iterates: np.ndarray
    residuals: np.ndarray
    termination: Termination
    wall_time: float
    times: np.ndarray | None = None

    def __post_init__(self):
        if len(self.iterates) != len(self.residuals):
            raise InvariantError("trace needs one residual per iterate")

    def __len__(self):
        return len(self.iterates)

    @property
    def final_point(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])


# file formats -----------------------------------------------------------------


def problem_to_dict(p: Problem) -> dict:
    d = {"n": p.n}
    if isinstance(p, AviProblem):
        d["M"] = p.M.tolist()
    else:
        d["Q"] = p.Q.tolist()
    d["q"] = p.q.tolist()
    d["C"] = p.C.to_dict()
    return d


def problem_from_dict(d: dict) -> Problem:
    try:
        C = constraint_from_dict(d["C"])
        q = d["q"]
        if "M" in d:
            p = AviProblem(d["M"], q, C)
        else:
            p = QuadraticProblem(d["Q"], q, C)
    except KeyError as exc:
        raise ValueError(f"problem record is missing field {exc}") from None
    if "n" in d and int(d["n"]) != p.n:
        raise DimensionError(f"declared n={d['n']} does not match data (n={p.n})")
    return p


def dumps_problem(p: Problem) -> str:
    return json.dumps(problem_to_dict(p))


def load_problem(path) -> Problem:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return problem_from_dict(d)


def save_problem(p: Problem, path) -> None:
    Path(path).write_text(dumps_problem(p) + "\n")


@dataclass
class SolveResult:
    """What a result file holds."""

    method: str
    final_point: np.ndarray
    residual: float
    iterations: int
    termination: Termination
    rho: float
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "final_point": np.asarray(self.final_point, dtype=float).tolist(),
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "termination": Termination(self.termination).value,
            "rho": float(self.rho),
            "wall_time": float(self.wall_time),
        }
        d.update(self.extra)
        return d


def write_result(result: SolveResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n")
