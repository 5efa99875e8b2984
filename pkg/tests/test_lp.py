import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from effortnet.errors import IterationLimit, ValidationError
from effortnet.lp import Constraint, LpFeasibilityProblem, solve_feasibility


def problem(rows, n):
    return LpFeasibilityProblem(n, tuple(Constraint(tuple(a), rel, r) for a, rel, r in rows))


def test_examples():
    out = solve_feasibility(problem([((1.0,), "<=", 1.0), ((2.0,), ">=", 1.0)], 1))
    assert out.feasible
    assert 0.5 - 1e-12 <= out.point[0] <= 1 + 1e-12
    out = solve_feasibility(problem([((1.0,), "<=", 1.0), ((1.0,), ">=", 2.0)], 1))
    assert not out.feasible and out.point is None
    assert out.phase1_objective > 1e-9


def test_empty_and_negative_rhs():
    assert solve_feasibility(LpFeasibilityProblem(3)).feasible
    # -x <= -2 is x >= 2
    out = solve_feasibility(problem([((-1.0,), "<=", -2.0), ((1.0,), "<=", 5.0)], 1))
    assert out.feasible and 2 - 1e-12 <= out.point[0] <= 5 + 1e-12
    # x >= -1 holds at x = 0
    assert solve_feasibility(problem([((1.0,), ">=", -1.0)], 1)).feasible


def test_validation():
    with pytest.raises(ValidationError):
        Constraint((1.0,), "==", 1.0)
    with pytest.raises(ValidationError):
        Constraint((np.inf,), "<=", 1.0)
    with pytest.raises(ValidationError):
        LpFeasibilityProblem(2, (Constraint((1.0,), "<=", 1.0),))


def test_pivot_limit():
    p = problem([((1.0, 1.0), ">=", 1.0), ((1.0, -1.0), ">=", 0.5)], 2)
    with pytest.raises(IterationLimit):
        solve_feasibility(p, max_pivots=1)


def random_problem(rng):
    n = int(rng.integers(1, 6))
    m = int(rng.integers(1, 6))
    rows = []
    for _ in range(m):
        a = rng.normal(size=n)
        a[rng.uniform(size=n) < 0.3] = 0.0
        rows.append((a, "<=" if rng.uniform() < 0.5 else ">=", float(rng.normal())))
    return problem(rows, n)


def scipy_verdict(p):
    A_ub, b_ub = [], []
    for c in p.constraints:
        sign = 1.0 if c.relation == "<=" else -1.0
        A_ub.append(sign * np.array(c.coeffs))
        b_ub.append(sign * c.rhs)
    r = linprog(np.zeros(p.variable_count), A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                bounds=[(0, None)] * p.variable_count, method="highs")
    return r.status == 0


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_sound_and_matches_scipy(seed):
    p = random_problem(np.random.default_rng(seed))
    out = solve_feasibility(p)
    if out.feasible:
        assert p.violation(out.point) <= 1e-9
    assert out.feasible == scipy_verdict(p)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_deterministic_and_scale_invariant(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng)
    a, b = solve_feasibility(p), solve_feasibility(p)
    assert a.pivots == b.pivots and a.feasible == b.feasible
    if a.feasible:
        np.testing.assert_array_equal(a.point, b.point)
    scaled = LpFeasibilityProblem(p.variable_count, tuple(
        Constraint(tuple(np.array(c.coeffs) * s), c.relation, c.rhs * s)
        for c, s in zip(p.constraints, rng.uniform(0.1, 10, size=len(p.constraints)))))
    assert solve_feasibility(scaled).feasible == a.feasible
