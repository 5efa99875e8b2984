"""Dense phase-1 simplex for small feasibility problems.

Variables are nonnegative; constraints are ``coeffs . x (<= | >=) rhs``.
Bland's rule (lowest-index entering column, lowest-index leaving basic
variable on ratio ties) makes the pivot sequence deterministic and cycle-free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IterationLimit, LpNumericalFailure, ValidationError

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[float, ...]
    relation: str  # "<=" or ">="
    rhs: float

    def __post_init__(self):
        if self.relation not in ("<=", ">="):
            raise ValidationError(f"unsupported relation {self.relation!r}")
        if not np.all(np.isfinite(self.coeffs)) or not np.isfinite(self.rhs):
            raise ValidationError("constraint coefficients must be finite")


@dataclass(frozen=True)
class LpFeasibilityProblem:
    variable_count: int
    constraints: tuple[Constraint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.variable_count < 0:
            raise ValidationError("variable_count must be >= 0")
        for c in self.constraints:
            if len(c.coeffs) != self.variable_count:
                raise ValidationError("constraint length does not match variable_count")

    def violation(self, x) -> float:
        """Largest violation of any constraint (or of x >= 0) at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = float(max(0.0, -x.min())) if x.size else 0.0
        for c in self.constraints:
            lhs = float(np.dot(c.coeffs, x)) if x.size else 0.0
            v = lhs - c.rhs if c.relation == "<=" else c.rhs - lhs
            worst = max(worst, v)
        return worst


@dataclass
class LpOutcome:
    feasible: bool
    point: np.ndarray | None
    phase1_objective: float
    pivots: int


def solve_feasibility(problem: LpFeasibilityProblem, *, tol: float = FEAS_TOL,
                      max_pivots: int = 1_000_000) -> LpOutcome:
    n = problem.variable_count
    m = len(problem.constraints)
    if m == 0:
        return LpOutcome(True, np.zeros(n), 0.0, 0)

    A = np.array([c.coeffs for c in problem.constraints], dtype=float).reshape(m, n)
    b = np.array([c.rhs for c in problem.constraints], dtype=float)
    geq = np.array([c.relation == ">=" for c in problem.constraints])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    geq[neg] = ~geq[neg]

    # columns: originals | one slack/surplus per row | artificials for >= rows
    art_rows = np.flatnonzero(geq)
    ncols = n + m + len(art_rows)
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for r in range(m):
        T[r, n + r] = -1.0 if geq[r] else 1.0
        if not geq[r]:
            basis[r] = n + r
    for a, r in enumerate(art_rows):
        T[r, n + m + a] = 1.0
        basis[r] = n + m + a
    # reduced costs of "minimise sum of artificials"
    T[m, n + m:ncols] = 1.0
    for r in art_rows:
        T[m] -= T[r]

    pivots = 0
    while True:
        entering = np.flatnonzero(T[m, :ncols] < -PIVOT_TOL)
        if entering.size == 0:
            break
        e = int(entering[0])
        col = T[:m, e]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:  # phase 1 is bounded below by 0
            raise LpNumericalFailure("unbounded phase-1 direction")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        leave = int(tied[np.argmin(basis[tied])])
        _pivot(T, leave, e)
        basis[leave] = e
        pivots += 1
        if pivots >= max_pivots:
            raise IterationLimit(f"simplex exceeded {max_pivots} pivots")

    objective = float(-T[m, -1])
    if objective > tol:
        return LpOutcome(False, None, objective, pivots)
    x = np.zeros(n)
    for r, v in enumerate(basis):
        if v < n:
            x[v] = max(T[r, -1], 0.0)
    if problem.violation(x) > tol:
        raise LpNumericalFailure(f"feasible point violates constraints by {problem.violation(x):.3e}")
    return LpOutcome(True, x, max(objective, 0.0), pivots)


def _pivot(T, r, c):
    T[r] /= T[r, c]
    for k in range(T.shape[0]):
        if k != r and T[k, c] != 0.0:
            T[k] -= T[k, c] * T[r]
