"""Social optimum, price of anarchy and the balanced-hierarchy PoA bound."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .equilibrium import EquilibriumResult, scalar_best_response, solve_equilibrium
from .errors import DegenerateOutput, DomainError, NearDegenerateWarning, TooLarge, ValidationError
from .model import EpProduct, NetworkTopology, balanced_shape, productivity_vector, social_output

BRUTE_FORCE_MAX_NODES = 12


class OptimalMethod(str, Enum):
    CLOSED_FORM_BALANCED = "closed-form-balanced"
    CLOSED_FORM_FLAT = "closed-form-flat"
    BRUTE_FORCE = "brute-force"


@dataclass
class OptimalEffort:
    x: np.ndarray
    so: float
    method: OptimalMethod
    grid: int = 0
    refine_rounds: int = 0


@dataclass
class PoaReport:
    so_equilibrium: float
    so_optimal: float
    poa: float
    x_star: np.ndarray
    x_opt: np.ndarray
    optimal_method: OptimalMethod
    multiplicity_note: bool = False
    equilibrium: EquilibriumResult | None = field(default=None, repr=False)


@dataclass
class BalancedBoundReport:
    d: int
    D: int
    beta: float
    xi: float | None
    phi_sequence: list[float]
    bound: float
    raw_bound: float
    clamped: bool = False


def opt_threshold(d: int) -> float:
    """``-ln(1 - 1/d)``: above it, zero effort at every internal level is optimal."""
    return math.inf if d <= 1 else -math.log(1 - 1 / d)


def optimal_effort(net: NetworkTopology, model, *, method: str = "auto", grid: int = 101,
                   refine_rounds: int = 3, max_nodes: int = BRUTE_FORCE_MAX_NODES) -> OptimalEffort:
    """Maximise social output over [0,1]^n.

    Closed forms cover balanced EP trees with ``mu = 1`` above the threshold
    and FLAT below it.  Everything else is searched exhaustively: social
    output is convex in each coordinate separately (a linear own term plus an
    exponential or linear term through the influencees), so some vertex of the
    cube is optimal and all vertices with leaves at 1 are enumerated.  A
    coordinate-wise grid ascent with ``refine_rounds`` rounds of tenfold
    refinement then polishes the incumbent.  Balanced trees search one effort
    per level.
    """
    if method not in ("auto", "brute"):
        raise ValidationError(f"unknown method {method!r}")
    shape = balanced_shape(net)
    ep_mu_one = isinstance(model, EpProduct) and model.params.mu.kind == "one"
    if method == "auto" and shape is not None and ep_mu_one:
        d, D = shape
        beta = model.params.beta
        if beta >= opt_threshold(d):
            x = np.where(np.array([bool(c) for c in net.children]), 0.0, 1.0)
            return OptimalEffort(x, social_output(net, model, x), OptimalMethod.CLOSED_FORM_BALANCED)
        if D == 1:
            x = np.ones(net.n)
            return OptimalEffort(x, social_output(net, model, x), OptimalMethod.CLOSED_FORM_FLAT)

    if shape is not None:
        levels = int(net.depth.max())
        free = [np.flatnonzero(net.depth == lv) for lv in range(levels)]
    else:
        free = [np.array([i]) for i in range(net.n) if net.children[i]]
        if net.n > max_nodes:
            raise TooLarge(f"brute-force optimum is capped at {max_nodes} nodes, network has {net.n}")

    def expand(z):
        x = np.ones(net.n)
        for grp, v in zip(free, z):
            x[grp] = v
        return x

    def so(z):
        return social_output(net, model, expand(z))

    k = len(free)
    if k == 0:
        x = np.ones(net.n)
        return OptimalEffort(x, social_output(net, model, x), OptimalMethod.BRUTE_FORCE, grid, refine_rounds)
    if k > 20:
        raise TooLarge(f"{k} free coordinates is too many for vertex enumeration")
    # all-ones first so ties resolve toward full production
    verts = np.array(list(itertools.product((1.0, 0.0), repeat=k)))
    X = np.ones((len(verts), net.n))
    for c, grp in enumerate(free):
        X[:, grp] = verts[:, [c]]
    vals = np.sum(productivity_vector(net, model, X) * X, axis=1)
    z = verts[int(np.argmax(vals))].copy()
    best = float(vals.max())
    z, best = _coordinate_grid_ascent(so, z, best, grid, refine_rounds)
    x = expand(z)
    return OptimalEffort(x, social_output(net, model, x), OptimalMethod.BRUTE_FORCE, grid, refine_rounds)


def _coordinate_grid_ascent(so, z, best, grid, refine_rounds, max_sweeps=100):
    spacing = 1.0 / (grid - 1)
    for rnd in range(refine_rounds + 1):
        if rnd == 0:
            offsets = np.linspace(0.0, 1.0, grid)
        else:
            spacing /= 10
            offsets = spacing * np.arange(-10, 11)
        for _ in range(max_sweeps):
            improved = False
            for c in range(len(z)):
                pts = offsets if rnd == 0 else np.clip(z[c] + offsets, 0.0, 1.0)
                for t in pts:
                    trial = z.copy()
                    trial[c] = t
                    v = so(trial)
                    if v > best + 1e-14:
                        z, best, improved = trial, v, True
            if not improved:
                break
    return z, best


def poa(net, model, payoff_fn, H, *, optimal: OptimalEffort | None = None, solver: dict | None = None,
        grid: int = 101, refine_rounds: int = 3) -> PoaReport:
    """Optimal over equilibrium social output for the scheme ``H``."""
    eq = solve_equilibrium(net, model, payoff_fn, H, **(solver or {}))
    opt = optimal or optimal_effort(net, model, grid=grid, refine_rounds=refine_rounds)
    so_eq = eq.social_output
    if so_eq <= 0:
        raise DegenerateOutput(f"equilibrium social output is {so_eq}; PoA is infinite")
    return PoaReport(
        so_equilibrium=so_eq,
        so_optimal=opt.so,
        poa=opt.so / so_eq,
        x_star=eq.x_star,
        x_opt=opt.x,
        optimal_method=opt.method,
        multiplicity_note=eq.multiple,
        equilibrium=eq,
    )


def xi(beta: float) -> float:
    """Unique fixed point of ``x = [1 - exp(-beta x)/beta]^+`` for ``beta > 1``."""
    if not beta > 1:
        raise DomainError(f"xi is defined for beta > 1, got {beta}")
    if beta - 1 < 1e-6:
        warnings.warn(f"beta={beta} is within 1e-6 of 1; xi is close to the degenerate root 0",
                      NearDegenerateWarning, stacklevel=2)
    choice, _ = scalar_best_response(1 / beta, beta)
    return choice


def phi(m: float, beta: float, xi_beta: float) -> float:
    """Lower bound on ``x + m exp(-beta x)`` at the constructed equilibrium."""
    mb = m * beta
    naive = (1 + math.log(mb)) / beta if mb > 0 else -math.inf
    return max(naive, mb + (1 - mb) * xi_beta)


def poa_bound_balanced(d: int, D: int, beta: float) -> BalancedBoundReport:
    if not (isinstance(d, (int, np.integer)) and d >= 1 and isinstance(D, (int, np.integer)) and D >= 1):
        raise DomainError(f"need integers d >= 1 and D >= 1, got d={d}, D={D}")
    if not (math.isfinite(beta) and beta >= 0):
        raise DomainError(f"beta must be finite and >= 0, got {beta}")
    if beta <= 1:
        return BalancedBoundReport(d, D, beta, None, [], 1.0, 1.0)
    x = xi(beta)
    ts = []
    m = d
    for _ in range(D):
        t = phi(m, beta, x)
        ts.append(t)
        m = d * t
    raw = d**D / ts[-1]
    return BalancedBoundReport(d, D, beta, x, ts, max(raw, 1.0), raw, clamped=raw < 1.0)
