"""Command-line interface: solve, classify, cone-map, traj1d, bench, gen."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench as B
from .core import (
    AviProblem,
    ConvergenceError,
    PreconditionError,
    SolveResult,
    SolverConfig,
    Termination,
    dumps_problem,
    load_problem,
    write_result,
)
from .dca import kkt_residual, run_dca
from .dynamics import VectorField, integrate, step_count, write_trajectory_csv
from .projection import ProjectionError
from .scalar import ScalarProblem, classify_spm, cone_membership_map, exact_trajectory
from .spectral import choose_rho, rho_is_certified

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _fmt(x) -> str:
    return "[" + ", ".join(repr(float(v)) for v in np.atleast_1d(x)) + "]"


def _solve(args) -> int:
    try:
        p = load_problem(args.problem)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    method = args.method.lower()
    scheme = "A" if method in ("a", "ode-a") else "B"
    if scheme == "B" and isinstance(p, AviProblem):
        raise UsageError("methods b and ode-b need a symmetric Q, not an AVI record")
    sym = p.M if not isinstance(p, AviProblem) else 0.5 * (p.M + p.M.T)
    rho = args.rho if args.rho is not None else choose_rho(sym, scheme, args.margin)
    if not rho_is_certified(sym, scheme, rho):
        if not args.unsafe_rho:
            raise UsageError(f"rho={rho} is not certified for scheme {scheme}; "
                             "pass --unsafe-rho to run anyway")
        print(f"ADVISORY: rho={rho} is not certified for scheme {scheme}; "
              "results carry no convergence guarantee", file=sys.stderr)
    x0 = p.C.reference_point() if args.x0 is None else args.x0
    if len(x0) != p.n:
        raise UsageError(f"--x0 has {len(x0)} entries, problem has n={p.n}")
    config = SolverConfig(rho=rho, eta=args.eta, h=args.h, residual_tol=args.tol,
                          max_iter=args.max_iter, T=args.T)
    if method in ("a", "b"):
        run = run_dca(p, scheme, config, x0, unsafe_rho=args.unsafe_rho)
        x, iters, term = run.final_point, run.iterations, run.termination
        wall = run.trace.wall_time
        extra = {"rate_estimate": run.rate_estimate}
        failed = term != Termination.RESIDUAL_TOL
    else:
        v = VectorField(scheme, p, rho, args.eta)
        traj = integrate(v, x0, config, stride=args.stride)
        if args.trajectory:
            write_trajectory_csv(traj, args.trajectory)
        x, iters, wall = traj.final_point, step_count(args.T, args.h), 0.0
        residual = kkt_residual(p, x)
        term = Termination.RESIDUAL_TOL if residual <= args.tol else Termination.MAX_TIME
        extra = {"invariance_violation": traj.invariance_violation, "status": traj.status,
                 "T": float(traj.times[-1])}
        failed = not traj.completed
    result = SolveResult(method, x, kkt_residual(p, x), iters, term, rho, wall, extra)
    if args.out:
        write_result(result, args.out)
    print(f"final_point={_fmt(x)} residual={result.residual:.3e} "
          f"iterations={iters} termination={term.value}")
    return EXIT_FAILURE if failed else EXIT_OK


def _classify(args) -> int:
    print(classify_spm(ScalarProblem(args.alpha, args.beta)))
    return EXIT_OK


def _cone_map(args) -> int:
    cmap = cone_membership_map(args.alpha_range, args.beta_range, args.resolution)
    if args.out:
        cmap.write_csv(args.out)
        print(f"wrote {cmap.member.size} nodes to {args.out}")
    else:
        print("alpha,beta,in_cone")
        for a, b, m in cmap.rows():
            print(f"{a!r},{b!r},{'true' if m else 'false'}")
    return EXIT_OK


def _traj1d(args) -> int:
    if not -1.0 <= args.x0 <= 1.0:
        raise UsageError("--x0 must lie in [-1, 1]")
    traj = exact_trajectory(ScalarProblem(args.alpha, args.beta), args.rho, args.eta,
                            args.x0, args.T)
    if args.out:
        traj.write_csv(args.out)
    for s in traj.segments:
        end = "inf" if math.isinf(s.t_end) else f"{s.t_end:.12g}"
        print(f"{s.region} [{s.t_start:.12g}, {end})")
    print(f"limit={traj.limit!r}")
    if args.alpha > 0 and args.rho < args.alpha:
        print("ADVISORY: rho < alpha, convergence to a KKT point is not guaranteed",
              file=sys.stderr)
    return EXIT_OK


def _spec_from(args) -> B.InstanceSpec:
    try:
        return B.InstanceSpec(n=args.n, constraint_kind=args.constraint, seed=args.seed,
                              count=args.count, scale=args.scale, q_scale=args.q_scale,
                              indefinite=not args.no_indefinite, m=args.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _bench(args) -> int:
    spec = _spec_from(args)
    methods = [m for m in args.methods.replace(",", " ").split() if m]
    cfg = B.BenchConfig(eta=args.eta, h=args.h, residual_tol=args.tol,
                        max_iter=args.max_iter, T=args.T, margin=args.margin)
    try:
        report = B.run_benchmark(spec, methods, cfg, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        report.write_csv(args.out)
    if args.summary:
        report.write_summary(args.summary)
    print(json.dumps(report.medians(), indent=2))
    return EXIT_FAILURE if any(r.error for r in report.rows) else EXIT_OK


def _gen(args) -> int:
    spec = _spec_from(args)
    problems = B.generate_instances(spec)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, p in enumerate(problems):
            (out / f"instance_{i:04d}.json").write_text(dumps_problem(p) + "\n")
        print(f"wrote {len(problems)} instances to {out}")
    else:
        sys.stdout.write(B.instance_stream(spec).decode())
    return EXIT_OK


def _instance_flags(p):
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--constraint", choices=B.CONSTRAINT_KINDS, default="box")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_positive_int, default=1)
    p.add_argument("--scale", type=_positive, default=1.0)
    p.add_argument("--q-scale", type=float, default=1.0)
    p.add_argument("--m", type=_positive_int, default=None, help="random rows for polyhedra")
    p.add_argument("--no-indefinite", action="store_true")


def _solver_flags(p):
    p.add_argument("--eta", type=_positive, default=1.0)
    p.add_argument("--h", type=_positive, default=1e-3)
    p.add_argument("--T", type=_positive, default=50.0)
    p.add_argument("--tol", type=_positive, default=1e-8)
    p.add_argument("--max-iter", type=_positive_int, default=100_000)
    p.add_argument("--margin", type=_positive, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iqpdyn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a DCA scheme or integrate a flow")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", required=True, choices=["a", "b", "ode-a", "ode-b"],
                   type=str.lower)
    p.add_argument("--x0", type=_vector, default=None, help="start point, e.g. '0.5' or '0,0'")
    p.add_argument("--rho", type=_positive, default=None)
    p.add_argument("--unsafe-rho", action="store_true",
                   help="run even if rho fails its certification")
    p.add_argument("--out", default=None, help="result JSON")
    p.add_argument("--trajectory", default=None, help="trajectory CSV (ode methods)")
    p.add_argument("--stride", type=_positive_int, default=100)
    _solver_flags(p)
    p.set_defaults(func=_solve)

    p = sub.add_parser("classify", help="strong pseudomonotonicity of alpha x + beta")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(func=_classify)

    p = sub.add_parser("cone-map", help="cone membership over an (alpha, beta) grid")
    p.add_argument("--alpha-range", type=float, nargs=2, default=[-3.0, 3.0])
    p.add_argument("--beta-range", type=float, nargs=2, default=[-3.0, 3.0])
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cone_map)

    p = sub.add_parser("traj1d", help="closed-form trajectory of the scalar flow")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rho", type=_positive, required=True)
    p.add_argument("--eta", type=_positive, default=1.0)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--T", type=_positive, default=math.inf)
    p.add_argument("--out", default=None, help="segments CSV")
    p.set_defaults(func=_traj1d)

    p = sub.add_parser("bench", help="batch-run methods on random instances")
    _instance_flags(p)
    _solver_flags(p)
    p.add_argument("--methods", default="A,B")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", default=None, help="report CSV")
    p.add_argument("--summary", default=None, help="summary JSON")
    p.set_defaults(func=_bench)

    p = sub.add_parser("gen", help="write random instances")
    _instance_flags(p)
    p.add_argument("--out", default=None, help="directory for instance files")
    p.set_defaults(func=_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) == "cone-map" and args.resolution < 2:
        print("iqpdyn: error: --resolution must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"iqpdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"iqpdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ProjectionError, ValueError) as exc:
        print(f"iqpdyn: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
