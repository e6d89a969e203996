"""Seeded random instances and batch runs of the DCA schemes and flows."""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    Ball,
    Box,
    Polyhedron,
    QuadraticProblem,
    SolverConfig,
    Termination,
    UnitInterval,
    dumps_problem,
)
from .dca import kkt_residual, run_dca
from .dynamics import VectorField, integrate, step_count
from .spectral import choose_rho, gershgorin_bounds

MASK64 = (1 << 64) - 1
METHODS = ("A", "B", "ODE-A", "ODE-B")
CONSTRAINT_KINDS = ("box", "ball", "polyhedron", "unit_interval")


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256ss:
    """xoshiro256** seeded by four splitmix64 outputs.

    uniform() maps the top 53 bits of a draw to [0, 1), so any implementation
    of the same two published generators reproduces the stream exactly.
    """

    def __init__(self, seed: int):
        sm = int(seed) & MASK64
        s = []
        for _ in range(4):
            sm, z = splitmix64(sm)
            s.append(z)
        self.s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def uniform_array(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        count = int(np.prod(shape))
        return np.array([self.uniform(lo, hi) for _ in range(count)]).reshape(shape)


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for a deterministic stream of random problems.

    Per instance the draws are taken in this order from one shared stream:
    R (n x n, row-major, U[-1, 1] times ``scale``), q (U[-1, 1] times
    ``q_scale``), then constraint data. Q = (R + R')/2, shifted by the
    midpoint of its Gershgorin interval when ``indefinite`` is set. A
    polyhedron draws A (m x n row-major, U[-1, 1], rows normalized), a
    feasible point in [-0.5, 0.5]^n and slacks in [0.1, 1], sets
    b = A x_feas + slack, and appends the rows +-e_i <= 1 so the set is bounded.
    """

    n: int
    constraint_kind: str = "box"
    seed: int = 0
    count: int = 1
    scale: float = 1.0
    q_scale: float = 1.0
    indefinite: bool = True
    m: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if self.constraint_kind not in CONSTRAINT_KINDS:
            raise ValueError(f"unknown constraint kind {self.constraint_kind!r}")
        if self.constraint_kind == "unit_interval" and self.n != 1:
            raise ValueError("unit_interval instances need n = 1")
        if not (self.scale > 0 and self.q_scale >= 0):
            raise ValueError("scale must be positive and q_scale nonnegative")


def _constraint(spec: InstanceSpec, rng: Xoshiro256ss):
    n = spec.n
    if spec.constraint_kind == "box":
        return Box(-np.ones(n), np.ones(n))
    if spec.constraint_kind == "ball":
        return Ball(np.zeros(n), math.sqrt(n))
    if spec.constraint_kind == "unit_interval":
        return UnitInterval()
    m = spec.m if spec.m is not None else n
    A = rng.uniform_array((m, n), -1.0, 1.0)
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0] = 1.0
    A = A / norms[:, None]
    x_feas = rng.uniform_array(n, -0.5, 0.5)
    slack = rng.uniform_array(m, 0.1, 1.0)
    b = A @ x_feas + slack
    eye = np.eye(n)
    A = np.vstack([A, eye, -eye])
    b = np.concatenate([b, np.ones(2 * n)])
    return Polyhedron(A, b, x_feas)


def generate_instances(spec: InstanceSpec) -> list[QuadraticProblem]:
    rng = Xoshiro256ss(spec.seed)
    out = []
    for _ in range(spec.count):
        R = rng.uniform_array((spec.n, spec.n), -1.0, 1.0) * spec.scale
        Q = 0.5 * (R + R.T)
        if spec.indefinite:
            g = gershgorin_bounds(Q)
            Q = Q - 0.5 * (g.lambda_min_lb + g.lambda_max_ub) * np.eye(spec.n)
        q = rng.uniform_array(spec.n, -1.0, 1.0) * spec.q_scale
        out.append(QuadraticProblem(Q, q, _constraint(spec, rng)))
    return out


def instance_stream(spec: InstanceSpec) -> bytes:
    """The serialized instances, one JSON document per line."""
    return "".join(dumps_problem(p) + "\n" for p in generate_instances(spec)).encode()


# batch runs -------------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    """Shared settings; rho is chosen per instance and method by choose_rho."""

    eta: float = 1.0
    h: float = 1e-3
    residual_tol: float = 1e-8
    max_iter: int = 100_000
    T: float = 50.0
    margin: float | None = None


@dataclass
class BenchRow:
    instance: int
    scheme: str
    iters: int
    time_s: float
    residual: float
    rate: float | None
    termination: str
    rho: float
    error: str = ""

    def csv_fields(self):
        rate = "" if self.rate is None else repr(self.rate)
        return [self.instance, self.scheme, self.iters, repr(self.time_s),
                repr(self.residual), rate]


@dataclass
class BenchReport:
    rows: list[BenchRow]
    methods: tuple[str, ...]

    def medians(self) -> dict:
        out = {}
        for m in self.methods:
            rows = [r for r in self.rows if r.scheme == m and not r.error]
            if not rows:
                out[m] = {"count": 0, "failures": sum(r.scheme == m for r in self.rows)}
                continue
            rates = [r.rate for r in rows if r.rate is not None]
            out[m] = {
                "count": len(rows),
                "failures": sum(r.scheme == m and bool(r.error) for r in self.rows),
                "iters": statistics.median(r.iters for r in rows),
                "time_s": statistics.median(r.time_s for r in rows),
                "residual": statistics.median(r.residual for r in rows),
                "rate": statistics.median(rates) if rates else None,
            }
        return out

    def non_timing(self) -> list[tuple]:
        return [(r.instance, r.scheme, r.iters, r.residual, r.rate, r.termination, r.rho, r.error)
                for r in self.rows]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "scheme", "iters", "time_s", "residual", "rate"])
            for r in self.rows:
                w.writerow(r.csv_fields())

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"methods": list(self.methods), "medians": self.medians()}, fh, indent=2)
            fh.write("\n")


def run_method(p: QuadraticProblem, method: str, cfg: BenchConfig, x0=None):
    """Run one method on one problem; returns (iters, residual, rate, termination, rho)."""
    method = method.upper()
    scheme = "A" if method in ("A", "ODE-A") else "B"
    sym = p.Q
    rho = choose_rho(sym, scheme, cfg.margin)
    config = SolverConfig(rho=rho, eta=cfg.eta, h=cfg.h, residual_tol=cfg.residual_tol,
                          max_iter=cfg.max_iter, T=cfg.T)
    start = p.C.reference_point() if x0 is None else np.asarray(x0, dtype=float)
    if method in ("A", "B"):
        run = run_dca(p, scheme, config, start)
        x = run.final_point
        iters, rate, term = run.iterations, run.rate_estimate, run.termination.value
    else:
        traj = integrate(VectorField(scheme, p, rho, cfg.eta), start, config,
                         stride=max(1, int(round(config.T / config.h))))
        if not traj.completed:
            raise RuntimeError(f"integration stopped early: {traj.status}")
        x = traj.final_point
        iters, rate, term = step_count(config.T, config.h), None, None
    residual = kkt_residual(p, x)
    if term is None:
        term = (Termination.RESIDUAL_TOL if residual <= cfg.residual_tol
                else Termination.MAX_TIME).value
    return iters, residual, rate, term, rho


def _run_instance(args):
    index, p, methods, cfg = args
    rows = []
    for m in methods:
        t0 = time.perf_counter()
        try:
            iters, res, rate, term, rho = run_method(p, m, cfg)
            rows.append(BenchRow(index, m, iters, time.perf_counter() - t0, res, rate, term, rho))
        except Exception as exc:  # recorded, never fatal to the batch
            rows.append(BenchRow(index, m, 0, time.perf_counter() - t0, math.nan, None,
                                 "error", math.nan, f"{type(exc).__name__}: {exc}"))
    return rows


def run_benchmark(spec_or_instances, methods, config: BenchConfig | None = None,
                  workers: int = 1) -> BenchReport:
    cfg = config or BenchConfig()
    methods = tuple(m.upper() for m in methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if isinstance(spec_or_instances, InstanceSpec):
        instances = generate_instances(spec_or_instances)
    else:
        instances = list(spec_or_instances)
    jobs = [(i, p, methods, cfg) for i, p in enumerate(instances)]
    if not methods or not jobs:
        return BenchReport([], methods)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_instance, jobs))
    else:
        chunks = [_run_instance(j) for j in jobs]
    return BenchReport([r for chunk in chunks for r in chunk], methods)


def spec_to_dict(spec: InstanceSpec) -> dict:
    return asdict(spec)
