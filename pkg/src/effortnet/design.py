"""Stable effort profiles and reward-scheme design on EP hierarchies.

A profile ``x`` is stable when some scheme ``H >= 0`` satisfies, per node,

    sum_j a_ij(x) h_ij >= 1 - x_i        (incentive covers communication)
    sum_j h_ij <= (1 + b) / beta^2        (keeps the equilibrium unique)

with ``a_ij = beta/(1+b) p_ij(x) x_j``.  The constraints split by node, so
each node is an independent tiny LP with a closed-form answer: put the whole
budget on the influencee with the largest ``a_ij``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .equilibrium import solve_equilibrium_tree
from .errors import ValidationError
from .lp import Constraint, LpFeasibilityProblem, solve_feasibility
from .model import (
    EpParams,
    EpProduct,
    EpQuadratic,
    Kind,
    NetworkTopology,
    RewardScheme,
    balanced_shape,
    effort_profile,
)
from .welfare import OptimalEffort, optimal_effort, poa_bound_balanced

STABILITY_TOL = 1e-9


class StabilityMethod(str, Enum):
    ANALYTIC = "analytic-per-node"
    LP = "generic-lp"


@dataclass
class NodeSlack:
    # best achievable incentive minus requirement: budget * max_j a_ij - (1 - x_i)
    margin: float
    # for the returned H: sum_j a_ij h_ij - (1 - x_i) and budget - sum_j h_ij
    incentive_slack: float | None = None
    budget_slack: float | None = None


@dataclass
class StabilityResult:
    stable: bool
    H: RewardScheme | None
    binding_report: list[NodeSlack]
    method: StabilityMethod

    @property
    def failing_nodes(self) -> list[int]:
        return [i for i, s in enumerate(self.binding_report) if s.margin < -STABILITY_TOL]


class Guarantee(str, Enum):
    OPTIMAL_SUPPORTED = "optimal-supported"
    BALANCED_BOUNDED = "balanced-bounded"
    HEURISTIC = "heuristic-best-found"


@dataclass
class DesignResult:
    H: RewardScheme
    achieved_so: float
    guarantee: Guarantee
    x_star: np.ndarray
    x_opt: np.ndarray
    so_optimal: float
    bound: float | None = None
    candidates: int = 0
    seed: int | None = None
    stability: StabilityResult | None = field(default=None, repr=False)

    @property
    def poa(self) -> float:
        return self.so_optimal / self.achieved_so


def stability_coefficients(net: NetworkTopology, params: EpParams, x) -> dict[tuple[int, int], float]:
    """``a_ij = beta/(1+b) p_ij(x) x_j`` for every influencee ``j`` of ``i``."""
    _require_hierarchy(net)
    x = effort_profile(x, net.n)
    phi = params.mu(net.child_counts) * np.exp(-params.beta * x)
    c = params.beta / (1 + params.b)
    a = {}
    for i in range(net.n):
        stack = [(ch, phi[i]) for ch in net.children[i]]
        while stack:
            j, pij = stack.pop()
            a[(i, j)] = c * pij * x[j]
            stack.extend((g, pij * phi[j]) for g in net.children[j])
    return a


def check_stability(net: NetworkTopology, params: EpParams, x) -> StabilityResult:
    """Closed-form stability test; builds the minimal concentrated scheme."""
    x = effort_profile(x, net.n)
    a = stability_coefficients(net, params, x)
    budget = params.budget
    shares = {}
    report = []
    for i in range(net.n):
        need = 1.0 - x[i]
        infl = sorted(net.descendants[i])
        if not infl:
            report.append(NodeSlack(margin=-need, incentive_slack=-need, budget_slack=budget))
            continue
        coeffs = [a[(i, j)] for j in infl]
        k = int(np.argmax(coeffs))  # first maximum = lowest id
        amax = coeffs[k]
        if need <= 0:
            report.append(NodeSlack(margin=_margin(budget, amax, need), incentive_slack=0.0, budget_slack=budget))
            continue
        margin = _margin(budget, amax, need)
        if amax <= 0 or margin < -STABILITY_TOL:
            report.append(NodeSlack(margin=margin))
            continue
        h = min(need / amax, budget)
        shares[(i, infl[k])] = h
        report.append(NodeSlack(margin=margin, incentive_slack=amax * h - need, budget_slack=budget - h))
    stable = all(s.margin >= -STABILITY_TOL for s in report)
    H = RewardScheme.from_entries(net, shares) if stable else None
    return StabilityResult(stable, H, report, StabilityMethod.ANALYTIC)


def _margin(budget, amax, need):
    if amax <= 0:
        return -need
    if math.isinf(budget):
        return math.inf
    return budget * amax - need


def stability_lp(net: NetworkTopology, params: EpParams, x) -> StabilityResult:
    """Same question as :func:`check_stability`, one phase-1 LP per node.

    A feasible point is rescaled so the incentive constraint binds exactly
    wherever ``x_i > 0``.
    """
    x = effort_profile(x, net.n)
    a = stability_coefficients(net, params, x)
    budget = params.budget
    shares = {}
    report = []
    stable = True
    for i in range(net.n):
        need = 1.0 - x[i]
        infl = sorted(net.descendants[i])
        coeffs = [a[(i, j)] for j in infl]
        amax = max(coeffs, default=0.0)
        margin = _margin(budget, amax, need) if infl else -need
        cons = [Constraint(tuple(coeffs), ">=", need)]
        if not math.isinf(budget):
            cons.append(Constraint(tuple(1.0 for _ in infl), "<=", budget))
        out = solve_feasibility(LpFeasibilityProblem(len(infl), tuple(cons)), tol=STABILITY_TOL)
        if not out.feasible:
            stable = False
            report.append(NodeSlack(margin=margin))
            continue
        h = out.point
        got = float(np.dot(coeffs, h)) if infl else 0.0
        if x[i] > 0 and got > need and got > 0:
            h = h * (need / got)
            got = need
        for j, v in zip(infl, h):
            if v > 0:
                shares[(i, j)] = float(v)
        report.append(NodeSlack(margin=margin, incentive_slack=got - need,
                                budget_slack=budget - float(np.sum(h))))
    H = RewardScheme.from_entries(net, shares) if stable else None
    return StabilityResult(stable, H, report, StabilityMethod.LP)


def balanced_case2_scheme(net: NetworkTopology, params: EpParams) -> RewardScheme:
    """Every internal node splits its full budget equally over its children."""
    budget = params.budget
    shares = {}
    for i in range(net.n):
        for c in net.children[i]:
            shares[(i, c)] = budget / len(net.children[i])
    return RewardScheme.from_entries(net, shares)


def design_reward_scheme(net: NetworkTopology, params: EpParams, *, optimal: OptimalEffort | None = None,
                         candidates: int = 500, seed: int = 42, grid: int = 101,
                         refine_rounds: int = 3) -> DesignResult:
    """Pick a reward scheme for an EP hierarchy.

    1. If the social optimum is stable, support it exactly (PoA = 1).
    2. Otherwise, on a balanced tree with ``beta > 1`` and ``mu = 1``, give
       each node's full budget to its children; the PoA then obeys the
       balanced bound.
    3. Otherwise search ``candidates`` random budget-respecting schemes
       (the zero scheme is candidate 0) and keep the best social output.
    """
    _require_hierarchy(net)
    model = EpProduct(params)
    payoff_fn = EpQuadratic(params.b)
    opt = optimal or optimal_effort(net, model, grid=grid, refine_rounds=refine_rounds)

    st = check_stability(net, params, opt.x)
    if st.stable:
        eq = solve_equilibrium_tree(net, model, payoff_fn, st.H)
        return DesignResult(st.H, eq.social_output, Guarantee.OPTIMAL_SUPPORTED, eq.x_star, opt.x, opt.so,
                            bound=1.0, stability=st)

    shape = balanced_shape(net)
    if shape is not None and params.beta > 1 and params.mu.kind == "one":
        H = balanced_case2_scheme(net, params)
        eq = solve_equilibrium_tree(net, model, payoff_fn, H)
        bound = poa_bound_balanced(shape[0], shape[1], params.beta).bound
        return DesignResult(H, eq.social_output, Guarantee.BALANCED_BOUNDED, eq.x_star, opt.x, opt.so,
                            bound=bound, stability=st)

    rng = np.random.default_rng(seed)
    budget = params.budget
    best = None
    for c in range(max(candidates, 1)):
        H = RewardScheme.zero(net) if c == 0 else _random_scheme(net, budget, rng)
        eq = solve_equilibrium_tree(net, model, payoff_fn, H)
        if best is None or eq.social_output > best[1].social_output:
            best = (H, eq)
    H, eq = best
    return DesignResult(H, eq.social_output, Guarantee.HEURISTIC, eq.x_star, opt.x, opt.so,
                        candidates=max(candidates, 1), seed=seed, stability=st)


def _random_scheme(net, budget, rng):
    if math.isinf(budget):
        budget = 1.0
    shares = {}
    for i in range(net.n):
        infl = sorted(net.descendants[i])
        if not infl:
            continue
        w = rng.dirichlet(np.ones(len(infl)))
        total = budget * rng.uniform()
        for j, v in zip(infl, w):
            if v * total > 0:
                shares[(i, j)] = float(v * total)
    return RewardScheme.from_entries(net, shares)


def _require_hierarchy(net):
    if net.kind is not Kind.HIERARCHY:
        raise ValidationError("stability and reward design are defined on hierarchies only")
