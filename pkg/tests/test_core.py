import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iqpdyn.core import (
    AviProblem,
    Ball,
    Box,
    DimensionError,
    InvariantError,
    Polyhedron,
    QuadraticProblem,
    SolveResult,
    SolverConfig,
    SolveTrace,
    Termination,
    UnitInterval,
    dumps_problem,
    load_problem,
    objective_value,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    write_result,
)


def _write(tmp_path, doc):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    return path


def test_objective_of_negative_curvature_at_one():
    p = QuadraticProblem([[-1.0]], [0.0], UnitInterval())
    assert objective_value(p, np.array([1.0])) == -0.5


def test_objective_at_origin_is_zero():
    p = QuadraticProblem(2 * np.eye(2), [1.0, 1.0], Box([-1, -1], [1, 1]))
    assert objective_value(p, np.zeros(2)) == 0.0


def test_objective_matches_expanded_sum():
    Q = np.array([[0.0, 2.0], [2.0, 0.0]])
    q = np.array([-1.0, 0.0])
    x = np.array([1.0, 1.0])
    p = QuadraticProblem(Q, q, Box([-1, -1], [1, 1]))
    expanded = 0.5 * sum(Q[i, j] * x[i] * x[j] for i in range(2) for j in range(2))
    expanded += sum(q[i] * x[i] for i in range(2))
    assert objective_value(p, x) == expanded == 1.0


def test_objective_rejects_wrong_dimension():
    p = QuadraticProblem([[-1.0]], [0.0], UnitInterval())
    with pytest.raises(DimensionError):
        objective_value(p, np.zeros(2))


def test_load_smallest_instance(tmp_path):
    p = load_problem(_write(tmp_path, {"n": 1, "Q": [[-1]], "q": [0], "C": {"type": "unit_interval"}}))
    assert isinstance(p, QuadraticProblem) and p.n == 1
    assert isinstance(p.C, UnitInterval)


def test_load_half_interval_as_box(tmp_path):
    doc = {"n": 1, "Q": [[0]], "q": [0], "C": {"type": "box", "lo": [0], "hi": [0.5]}}
    p = load_problem(_write(tmp_path, doc))
    assert isinstance(p.C, Box)
    assert p.C.lo.tolist() == [0.0] and p.C.hi.tolist() == [0.5]


def test_load_unit_ball(tmp_path):
    doc = {"n": 2, "Q": [[1, 0], [0, 1]], "q": [0, 0], "C": {"type": "ball", "a": [0, 0], "r": 1.0}}
    p = load_problem(_write(tmp_path, doc))
    assert isinstance(p.C, Ball) and p.C.radius == 1.0


def test_load_avi_record(tmp_path):
    doc = {"n": 2, "M": [[1, 2], [0, 1]], "q": [0, 0], "C": {"type": "box", "lo": [-1, -1], "hi": [1, 1]}}
    p = load_problem(_write(tmp_path, doc))
    assert isinstance(p, AviProblem)


@pytest.mark.parametrize("asym, ok", [(1e-12, True), (2e-12, False)])
def test_symmetry_tolerance_is_absolute_1e12(asym, ok):
    Q = np.array([[1.0, 0.5], [0.5 + asym, 1.0]])
    if ok:
        QuadraticProblem(Q, [0, 0], Box([-1, -1], [1, 1]))
    else:
        with pytest.raises(InvariantError):
            QuadraticProblem(Q, [0, 0], Box([-1, -1], [1, 1]))


def test_asymmetric_quadratic_record_rejected(tmp_path):
    doc = {"n": 2, "Q": [[0, 1], [0, 0]], "q": [0, 0], "C": {"type": "box", "lo": [-1, -1], "hi": [1, 1]}}
    with pytest.raises(InvariantError):
        load_problem(_write(tmp_path, doc))


def test_polyhedron_needs_feasible_certificate(tmp_path):
    C = {"type": "polyhedron", "A": [[1.0]], "b": [0.0]}
    with pytest.raises(InvariantError):
        load_problem(_write(tmp_path, {"n": 1, "Q": [[1]], "q": [0], "C": C}))
    C["feasible_point"] = [1.0]
    with pytest.raises(InvariantError):
        load_problem(_write(tmp_path, {"n": 1, "Q": [[1]], "q": [0], "C": C}))


def test_declared_dimension_must_match(tmp_path):
    with pytest.raises(DimensionError):
        load_problem(_write(tmp_path, {"n": 2, "Q": [[1]], "q": [0], "C": {"type": "unit_interval"}}))


def test_parse_errors_are_value_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValueError):
        load_problem(path)
    with pytest.raises(ValueError):
        problem_from_dict({"n": 1, "Q": [[1]], "C": {"type": "unit_interval"}})
    with pytest.raises(ValueError):
        problem_from_dict({"n": 1, "Q": [[1]], "q": [0], "C": {"type": "simplex"}})


@pytest.mark.parametrize(
    "make",
    [
        lambda: Box([1.0], [0.0]),
        lambda: Ball([0.0], 0.0),
        lambda: Ball([0.0], -1.0),
        lambda: Box([0.0, np.nan], [1.0, 1.0]),
    ],
)
def test_constraint_invariants(make):
    with pytest.raises(InvariantError):
        make()


def test_dimension_disagreement_rejected():
    with pytest.raises(DimensionError):
        QuadraticProblem(np.eye(2), [0.0], Box([-1, -1], [1, 1]))
    with pytest.raises(DimensionError):
        QuadraticProblem(np.eye(2), [0.0, 0.0], UnitInterval())
    with pytest.raises(DimensionError):
        Box([0.0, 0.0], [1.0])


def test_problem_arrays_are_read_only():
    p = QuadraticProblem(np.eye(2), [0.0, 0.0], Box([-1, -1], [1, 1]))
    with pytest.raises(ValueError):
        p.Q[0, 0] = 5.0
    with pytest.raises(ValueError):
        p.C.lo[0] = 5.0


@pytest.mark.parametrize("field", ["rho", "eta", "h", "residual_tol", "max_iter", "T"])
@pytest.mark.parametrize("bad", [0, -1.0, float("nan")])
def test_solver_config_fields_strictly_positive(field, bad):
    kwargs = {"rho": 1.0, field: bad}
    with pytest.raises(InvariantError):
        SolverConfig(**kwargs)


def test_solver_config_defaults():
    c = SolverConfig(rho=2.0)
    assert (c.eta, c.h, c.residual_tol, c.max_iter, c.T) == (1.0, 1e-3, 1e-8, 100_000, 50.0)


def test_trace_needs_one_residual_per_iterate():
    with pytest.raises(InvariantError):
        SolveTrace(np.zeros((3, 1)), np.zeros(2), Termination.MAX_ITER, 0.0)


def test_result_file_fields(tmp_path):
    path = tmp_path / "r.json"
    write_result(SolveResult("a", np.array([1.0]), 0.0, 2, Termination.RESIDUAL_TOL, 2.0), path)
    d = json.loads(path.read_text())
    assert d["final_point"] == [1.0]
    assert d["termination"] == "residual_tol"
    assert d["iterations"] == 2 and d["residual"] == 0.0


floats = st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False)


@st.composite
def problems(draw):
    n = draw(st.integers(1, 4))
    R = np.array(draw(st.lists(floats, min_size=n * n, max_size=n * n))).reshape(n, n)
    Q = 0.5 * (R + R.T)
    q = draw(st.lists(floats, min_size=n, max_size=n))
    kind = draw(st.sampled_from(["box", "ball", "polyhedron", "unit"] if n == 1 else ["box", "ball", "polyhedron"]))
    if kind == "box":
        lo = np.array(draw(st.lists(floats, min_size=n, max_size=n)))
        C = Box(lo, lo + np.abs(draw(st.lists(floats, min_size=n, max_size=n))))
    elif kind == "ball":
        C = Ball(draw(st.lists(floats, min_size=n, max_size=n)), draw(st.floats(1e-3, 1e3)))
    elif kind == "unit":
        C = UnitInterval()
    else:
        m = draw(st.integers(1, 4))
        A = np.array(draw(st.lists(floats, min_size=m * n, max_size=m * n))).reshape(m, n)
        xf = np.array(draw(st.lists(floats, min_size=n, max_size=n)))
        b = A @ xf + np.abs(draw(st.lists(floats, min_size=m, max_size=m)))
        C = Polyhedron(A, b, xf)
    if draw(st.booleans()):
        return AviProblem(R, q, C)
    return QuadraticProblem(Q, q, C)


@given(problems())
def test_round_trip_is_bit_exact(p):
    text = dumps_problem(p)
    again = problem_from_dict(json.loads(text))
    assert dumps_problem(again) == text
    assert problem_to_dict(again) == problem_to_dict(p)
    assert type(again) is type(p)


@given(problems())
def test_file_round_trip(tmp_path_factory, p):
    path = tmp_path_factory.mktemp("rt") / "p.json"
    save_problem(p, path)
    assert dumps_problem(load_problem(path)) == dumps_problem(p)
