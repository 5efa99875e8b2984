"""Nash equilibrium computation and uniqueness certificates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .errors import NoConvergence, NoConvergenceWarning, ValidationError
from .model import (
    EpParams,
    EpProduct,
    EpQuadratic,
    Kind,
    NetworkTopology,
    ProductivityModel,
    RewardScheme,
    efor_vector,
    outputs,
    productivity_vector,
    social_output,
)

ROOT_TOL = 1e-12
DEDUP_TOL = 1e-9
CERT_REL_TOL = 1e-12


class Method(str, Enum):
    TREE = "tree-backward-induction"
    FIXED_POINT = "fixed-point-iteration"


@dataclass
class EquilibriumResult:
    x_star: np.ndarray
    outputs: np.ndarray
    residual: float
    iterations: int
    method: Method
    # node -> all KKT candidates for that node (only nodes with more than one)
    multiplicity: dict[int, tuple[float, ...]] = field(default_factory=dict)
    seed: int | None = None
    # fixed-point route only: distinct limits reached from different starts
    distinct_limits: list[np.ndarray] = field(default_factory=list)
    unconverged_starts: int = 0

    @property
    def social_output(self) -> float:
        return float(self.outputs.sum())

    @property
    def multiple(self) -> bool:
        return bool(self.multiplicity) or len(self.distinct_limits) > 1


class Verdict(str, Enum):
    UNIQUE = "unique"
    INCONCLUSIVE = "inconclusive"


@dataclass
class UniquenessCertificate:
    kind: str  # "tree-analytic" or "sampled-spectral"
    verdict: Verdict
    threshold: float
    observed: float
    h_max: float | None = None
    samples: int = 0
    seed: int | None = None
    argmax_sample: np.ndarray | None = None
    heuristic: bool = False
    # tree-analytic: beta^2 h_max and 1+b, the two sides of the strict inequality
    lhs: float | None = None
    rhs: float | None = None


# --------------------------------------------------------------------------
# best-response maps
# --------------------------------------------------------------------------


def effort_update(net, model, payoff_fn, H, x) -> np.ndarray:
    """Effort update function ``F = T o ell o g`` (batch-aware)."""
    g = efor_vector(net, model, H, x)
    return np.clip(payoff_fn.ell(g), 0.0, 1.0)


def effort_update_tree(net: NetworkTopology, params: EpParams, H: RewardScheme, x) -> np.ndarray:
    """Closed-form EP update ``[1 - beta/(1+b) sum_j h_ij p_ij x_j]^+`` on a hierarchy.

    Walks each subtree explicitly; kept separate from :func:`effort_update` so
    the two can check each other.
    """
    _require_hierarchy(net)
    x = np.asarray(x, dtype=float)
    phi = params.mu(net.child_counts) * np.exp(-params.beta * x)
    Hd = H.dense
    out = np.empty(net.n)
    for i in range(net.n):
        s = 0.0
        stack = [(c, phi[i]) for c in net.children[i]]
        while stack:
            j, pij = stack.pop()
            s += Hd[i, j] * pij * x[j]
            stack.extend((c, pij * phi[j]) for c in net.children[j])
        out[i] = max(0.0, 1.0 - params.beta / (1 + params.b) * s)
    return out


# --------------------------------------------------------------------------
# scalar best response
# --------------------------------------------------------------------------


class ScalarBestResponse(NamedTuple):
    choice: float
    candidates: tuple[float, ...]


def scalar_best_response(A: float, beta: float, b: float = 0.0,
                         subtree_payoff: Callable[[float], float] | None = None) -> ScalarBestResponse:
    """Solve ``x = [1 - A exp(-beta x)]^+`` on [0,1] and pick the best root.

    ``r(x) = x - 1 + A exp(-beta x)`` is convex, so it has at most two roots;
    they are bracketed on either side of its minimiser and bisected.  ``x = 0``
    is also a fixed point whenever ``A >= 1``.  Among all candidates the one
    maximising ``subtree_payoff`` wins, ties going to the larger effort.  By
    default ``subtree_payoff`` is the node's utility divided by its own
    (positive, constant) productivity.
    """
    if A < 0 or beta < 0:
        raise ValidationError("A and beta must be nonnegative")

    def r(t):
        return t - 1.0 + A * math.exp(-beta * t)

    cands = []
    if A >= 1.0:
        cands.append(0.0)
    if A * beta > 1.0:
        xm = min(1.0, math.log(A * beta) / beta)
    else:
        xm = 0.0
    for lo, hi in ((0.0, xm), (xm, 1.0)):
        root = _bisect_root(r, lo, hi)
        if root is not None:
            cands.append(root)
    cands = _dedupe(cands)
    if not cands:  # r is continuous with r(1) >= 0, so this is a bug
        raise NoConvergence(f"no fixed point bracketed for A={A}, beta={beta}")

    if subtree_payoff is None:
        S = A * (1 + b) / beta if beta > 0 else 0.0
        f = EpQuadratic(b).f

        def subtree_payoff(t):
            return float(f(t)) + S * math.exp(-beta * t)

    best = cands[0]
    best_u = subtree_payoff(best)
    for c in cands[1:]:
        u = subtree_payoff(c)
        if u >= best_u - 1e-12:
            best, best_u = c, u
    return ScalarBestResponse(best, tuple(cands))


def _bisect_root(r, lo, hi):
    """Root of ``r`` on [lo, hi] if it changes sign there (r monotone on it)."""
    if hi < lo:
        return None
    rlo, rhi = r(lo), r(hi)
    if abs(rlo) <= ROOT_TOL:
        return lo
    if abs(rhi) <= ROOT_TOL:
        return hi
    if (rlo > 0) == (rhi > 0):
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rm = r(mid)
        if abs(rm) <= ROOT_TOL or hi - lo <= 4e-16:
            return mid
        if (rm > 0) == (rlo > 0):
            lo, rlo = mid, rm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _dedupe(values, tol=DEDUP_TOL):
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


# --------------------------------------------------------------------------
# solvers
# --------------------------------------------------------------------------


def solve_equilibrium_tree(net: NetworkTopology, model: EpProduct, payoff_fn: EpQuadratic,
                           H: RewardScheme) -> EquilibriumResult:
    """Backward induction from the leaves to the root, O(n^2) worst case.

    Each node's own factor ``exp(-beta x_i)`` is pulled out of its subtree sum
    so the node faces a scalar fixed-point problem in ``x_i`` alone.
    """
    _require_hierarchy(net)
    params = _ep_params(model)
    if not isinstance(payoff_fn, EpQuadratic):
        raise ValidationError("tree solver needs the quadratic EP direct payoff")
    if payoff_fn.b != params.b:
        raise ValidationError("payoff b and productivity b disagree")
    beta, b = params.beta, params.b
    mu = params.mu(net.child_counts)
    Hd = H.dense
    x = np.ones(net.n)
    multiplicity = {}
    for i in range(net.n - 1, -1, -1):
        if not net.children[i]:
            continue
        s = 0.0
        stack = [(c, mu[i]) for c in net.children[i]]
        while stack:
            j, q = stack.pop()
            s += Hd[i, j] * q * x[j]
            qj = q * mu[j] * math.exp(-beta * x[j])
            stack.extend((c, qj) for c in net.children[j])
        A = beta / (1 + b) * s
        choice, cands = scalar_best_response(A, beta, b)
        x[i] = choice
        if len(cands) > 1:
            multiplicity[i] = cands
    F = effort_update(net, model, payoff_fn, H, x)
    return EquilibriumResult(
        x_star=x,
        outputs=outputs(net, model, x),
        residual=float(np.max(np.abs(x - F))),
        iterations=0,
        method=Method.TREE,
        multiplicity=multiplicity,
    )


def solve_equilibrium_fixed_point(net: NetworkTopology, model: ProductivityModel, payoff_fn,
                                  H: RewardScheme, *, tol: float = 1e-10, max_iter: int = 100_000,
                                  starts: int = 16, seed: int = 42, initial=None,
                                  scan_points: int = 201) -> EquilibriumResult:
    """Multi-start iteration of ``x <- F(x)``.

    Start 0 is all-ones, the rest are uniform on [0,1]^n from ``seed``;
    ``initial`` prepends explicit starting profiles.  Starts run as one batch.
    Limits further apart than ``100 * tol`` count as distinct equilibria and
    the one with the largest social output is returned.  Each node's scalar
    fixed-point condition is then scanned at the returned point to list
    alternative roots in ``multiplicity``.
    """
    n = net.n
    rng = np.random.default_rng(seed)
    X = [np.ones(n)]
    if starts > 1:
        X.extend(rng.uniform(size=(starts - 1, n)))
    if initial is not None:
        X = [np.asarray(v, dtype=float) for v in np.atleast_2d(initial)] + X
    X = np.array(X)
    S = X.shape[0]
    done = np.zeros(S, dtype=bool)
    iters = np.zeros(S, dtype=int)
    last_change = np.full(S, np.inf)
    for it in range(1, max_iter + 1):
        active = ~done
        Xa = X[active]
        Fa = effort_update(net, model, payoff_fn, H, Xa)
        change = np.max(np.abs(Fa - Xa), axis=1)
        last_change[active] = change
        conv = change < tol
        idx = np.flatnonzero(active)
        # converged rows keep X (their residual is < tol); others advance
        X[idx[~conv]] = Fa[~conv]
        iters[idx[conv]] = it
        done[idx[conv]] = True
        if done.all():
            break
    if not done.any():
        raise NoConvergence(
            f"fixed-point iteration did not converge in {max_iter} iterations "
            f"(last max-norm change {np.min(last_change):.3e})",
            residual=float(np.min(last_change)), iterations=max_iter)

    conv_idx = np.flatnonzero(done)
    limits: list[tuple[int, np.ndarray]] = []
    for k in conv_idx:
        if not any(np.max(np.abs(X[k] - v)) <= 100 * tol for _, v in limits):
            limits.append((int(k), X[k].copy()))
    best_k, best_x = max(limits, key=lambda kv: (social_output(net, model, kv[1]), -kv[0]))
    residual = float(np.max(np.abs(best_x - effort_update(net, model, payoff_fn, H, best_x))))
    return EquilibriumResult(
        x_star=best_x,
        outputs=outputs(net, model, best_x),
        residual=residual,
        iterations=int(iters[best_k]),
        method=Method.FIXED_POINT,
        multiplicity=_scan_alternative_roots(net, model, payoff_fn, H, best_x, scan_points),
        seed=seed,
        distinct_limits=[v for _, v in limits] if len(limits) > 1 else [],
        unconverged_starts=int(S - done.sum()),
    )


def _scan_alternative_roots(net, model, payoff_fn, H, x, points):
    """Roots of ``t - F_i(x with x_i = t)`` on [0,1] for every node i."""
    n = net.n
    grid = np.linspace(0.0, 1.0, points)
    batch = np.repeat(x[None, :], n * points, axis=0)
    rows = np.arange(n * points)
    nodes = np.repeat(np.arange(n), points)
    batch[rows, nodes] = np.tile(grid, n)
    Fb = effort_update(net, model, payoff_fn, H, batch)
    r = (np.tile(grid, n) - Fb[rows, nodes]).reshape(n, points)
    found = {}
    for i in range(n):
        roots = [float(grid[k]) for k in range(points) if abs(r[i, k]) <= ROOT_TOL]
        sign_change = np.flatnonzero((r[i, :-1] > ROOT_TOL) & (r[i, 1:] < -ROOT_TOL)
                                     | (r[i, :-1] < -ROOT_TOL) & (r[i, 1:] > ROOT_TOL))

        def ri(t, i=i):
            y = x.copy()
            y[i] = t
            return t - effort_update(net, model, payoff_fn, H, y)[i]

        for k in sign_change:
            root = _bisect_root(ri, float(grid[k]), float(grid[k + 1]))
            if root is not None:
                roots.append(root)
        roots = _dedupe(roots + [float(x[i])])
        if len(roots) > 1:
            found[i] = tuple(roots)
    return found


def solve_equilibrium(net, model, payoff_fn, H, *, method: str | None = None, **opts) -> EquilibriumResult:
    """Tree solver for EP hierarchies, fixed-point iteration otherwise."""
    if method is None:
        method = "tree" if (net.kind is Kind.HIERARCHY and isinstance(model, EpProduct)) else "fixed-point"
    if method == "tree":
        return solve_equilibrium_tree(net, model, payoff_fn, H)
    if method == "fixed-point":
        return solve_equilibrium_fixed_point(net, model, payoff_fn, H, **opts)
    raise ValidationError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# uniqueness
# --------------------------------------------------------------------------


def h_max(net: NetworkTopology, H: RewardScheme) -> float:
    """Largest total share any node collects from its influencees."""
    if not H.shares:
        return 0.0
    return float(H.row_sums().max())


def uniqueness_certificate_tree(net: NetworkTopology, params: EpParams, H: RewardScheme) -> UniquenessCertificate:
    """Exact sufficient condition ``beta^2 h_max < 1 + b`` for EP hierarchies.

    The inequality is strict; a left side within a relative 1e-12 of the
    right side (a scheme that spends the full budget) counts as a tie.
    """
    _require_hierarchy(net)
    hm = h_max(net, H)
    lhs = params.beta**2 * hm
    rhs = 1 + params.b
    threshold = math.inf if hm == 0 else math.sqrt(rhs / hm)
    return UniquenessCertificate(
        kind="tree-analytic",
        verdict=Verdict.UNIQUE if lhs < rhs * (1 - CERT_REL_TOL) else Verdict.INCONCLUSIVE,
        threshold=threshold,
        observed=params.beta,
        h_max=hm,
        lhs=lhs,
        rhs=rhs,
    )


def jacobian_G(net, model, payoff_fn, H, x, mode: str = "analytic", step: float = 1e-6) -> np.ndarray:
    """Jacobian of the untruncated map ``G = ell o g``.

    ``mode="analytic"`` is available for the EP model; ``mode="fd"`` uses
    central differences with the given step.
    """
    x = np.asarray(x, dtype=float)
    n = net.n
    if mode == "fd":
        J = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = step
            gp = payoff_fn.ell(efor_vector(net, model, H, x + e))
            gm = payoff_fn.ell(efor_vector(net, model, H, x - e))
            J[:, k] = (gp - gm) / (2 * step)
        return J
    if mode != "analytic":
        raise ValidationError(f"unknown Jacobian mode {mode!r}")
    if not isinstance(model, EpProduct):
        raise ValidationError("analytic Jacobian is implemented for the EP model only")
    beta = model.params.beta
    Hd = H.dense
    p = productivity_vector(net, model, x)
    ratio = p[None, :] / p[:, None]  # p_j / p_i
    W = Hd * ratio * x[None, :]
    # dg_i/dx_k = beta h_ik p_k/p_i - beta^2 sum_{j: k in R_j \ R_i} h_ij (p_j/p_i) x_j
    dg = beta * Hd * ratio - beta**2 * np.einsum("ij,kij->ik", W, net.path_mask)
    g = efor_vector(net, model, H, x)
    return payoff_fn.ell_slope(g)[:, None] * dg


def spectral_norm(M, *, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on ``M^T M``.

    Warns with :class:`NoConvergenceWarning` and returns the last estimate if
    the relative change never drops below ``tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0 or not np.any(M):
        return 0.0
    MtM = M.T @ M
    v = np.random.default_rng(0).uniform(0.5, 1.5, size=MtM.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = MtM @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return math.sqrt(max(lam_new, 0.0))
        lam = lam_new
    warnings.warn(f"power iteration did not converge in {max_iter} steps", NoConvergenceWarning, stacklevel=2)
    return math.sqrt(max(lam, 0.0))


def uniqueness_certificate_general(net, model, payoff_fn, H, *, samples: int = 1000, seed: int = 42,
                                   mode: str | None = None) -> UniquenessCertificate:
    """Sampled lower estimate of ``sup_x ||grad G(x)||_2``.

    The verdict is a heuristic: the supremum is only approximated from below
    by ``samples`` uniform points, so ``unique`` is not a proof.
    """
    if mode is None:
        mode = "analytic" if isinstance(model, EpProduct) else "fd"
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(samples, net.n))
    best, arg = -1.0, None
    for x in pts:
        s = spectral_norm(jacobian_G(net, model, payoff_fn, H, x, mode=mode))
        if s > best:
            best, arg = s, x
    return UniquenessCertificate(
        kind="sampled-spectral",
        verdict=Verdict.UNIQUE if best < 1 - 1e-6 else Verdict.INCONCLUSIVE,
        threshold=1.0,
        observed=max(best, 0.0),
        samples=samples,
        seed=seed,
        argmax_sample=arg,
        heuristic=True,
    )


# --------------------------------------------------------------------------


def _require_hierarchy(net):
    if net.kind is not Kind.HIERARCHY:
        raise ValidationError("this operation is defined on hierarchies only")


def _ep_params(model) -> EpParams:
    if not isinstance(model, EpProduct):
        raise ValidationError("this operation needs the exponential-productivity model")
    return model.params
