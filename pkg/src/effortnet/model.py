"""Network topology, productivity and payoff evaluation.

Nodes are 0-based inside the library (node 0 is the root of a hierarchy);
file and CLI I/O converts to and from 1-based ids.

Every productivity model here is a product of per-node communication
factors: ``p_j = prod_{k in R_j} phi_k(x_k)``, where ``R_j`` is the set of
influencers (ancestors) of ``j``.  Derivatives and fractional productivities
follow from that structure without dividing by possibly-zero factors.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import (
    BudgetViolated,
    CycleError,
    DisconnectedHierarchy,
    MultipleParents,
    NonPositiveGamma,
    NonTopologicalNumbering,
    NotDescendant,
    TopologyError,
    ValidationError,
)


class Kind(str, Enum):
    HIERARCHY = "hierarchy"
    DAG = "dag"


# --------------------------------------------------------------------------
# topology
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Validated influence graph; build it with :func:`validate_topology`."""

    n: int
    edges: tuple[tuple[int, int], ...]
    kind: Kind
    parent: tuple[int, ...]  # -1 for the root / DAG sources
    children: tuple[tuple[int, ...], ...]
    ancestors: tuple[frozenset[int], ...]
    descendants: tuple[frozenset[int], ...]

    @property
    def child_counts(self) -> np.ndarray:
        return np.array([len(c) for c in self.children], dtype=float)

    @property
    def leaves(self) -> list[int]:
        return [i for i in range(self.n) if not self.children[i]]

    @cached_property
    def anc_matrix(self) -> np.ndarray:
        """``A[k, j]`` is True iff ``k`` is an influencer of ``j``."""
        A = np.zeros((self.n, self.n), dtype=bool)
        for j, anc in enumerate(self.ancestors):
            A[list(anc), j] = True
        return A

    @cached_property
    def path_mask(self) -> np.ndarray:
        """``M[k, i, j]`` is True iff ``k`` lies in ``R_j \\ R_i``.

        For ``j`` a descendant of ``i`` these are the nodes whose factors make
        up ``p_j / p_i``; on a tree it is the path from ``i`` (inclusive) down
        to ``j`` (exclusive).  Entries for non-descendant pairs are False.
        """
        A = self.anc_matrix
        E = A  # A[i, j]: j is a descendant of i
        M = A[:, None, :] & ~A[:, :, None]
        return M & E[None, :, :]

    @cached_property
    def depth(self) -> np.ndarray:
        return np.array([len(a) for a in self.ancestors], dtype=int)

    def __eq__(self, other):
        if not isinstance(other, NetworkTopology):
            return NotImplemented
        return (self.n, sorted(self.edges), self.kind) == (other.n, sorted(other.edges), other.kind)

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.edges)), self.kind))


def validate_topology(edges: Iterable[tuple[int, int]], n: int, kind: Kind | str = Kind.HIERARCHY) -> NetworkTopology:
    """Check an edge list (0-based ids) and precompute influencer sets.

    Raises the specific :class:`TopologyError` subclass for each violation.
    """
    kind = Kind(kind)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"node_count must be a positive integer, got {n!r}")
    n = int(n)
    edge_list = []
    for e in edges:
        i, j = (int(v) for v in e)
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"edge ({i}, {j}) references a node outside 0..{n - 1}")
        edge_list.append((i, j))
    if len(set(edge_list)) != len(edge_list):
        if kind is Kind.HIERARCHY:
            raise MultipleParents("duplicate edge in hierarchy")
        raise TopologyError("duplicate edge")

    if kind is Kind.DAG:
        _check_acyclic(n, edge_list)
    for i, j in edge_list:
        if i >= j:
            raise NonTopologicalNumbering(f"edge ({i}, {j}) does not go from a lower to a higher id")

    parent = [-1] * n
    kids: list[list[int]] = [[] for _ in range(n)]
    parents_of: list[list[int]] = [[] for _ in range(n)]
    for i, j in edge_list:
        kids[i].append(j)
        parents_of[j].append(i)
    if kind is Kind.HIERARCHY:
        for j in range(1, n):
            if len(parents_of[j]) > 1:
                raise MultipleParents(f"node {j} has {len(parents_of[j])} parents")
            if not parents_of[j]:
                raise DisconnectedHierarchy(f"node {j} has no parent")
            parent[j] = parents_of[j][0]

    # ids are topological, so ancestors accumulate in one forward pass
    ancestors: list[set[int]] = [set() for _ in range(n)]
    for j in range(n):
        for i in parents_of[j]:
            ancestors[j] |= ancestors[i] | {i}
    descendants: list[set[int]] = [set() for _ in range(n)]
    for j in range(n):
        for i in ancestors[j]:
            descendants[i].add(j)

    return NetworkTopology(
        n=n,
        edges=tuple(edge_list),
        kind=kind,
        parent=tuple(parent),
        children=tuple(tuple(sorted(c)) for c in kids),
        ancestors=tuple(frozenset(a) for a in ancestors),
        descendants=tuple(frozenset(d) for d in descendants),
    )


def _check_acyclic(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
    state = [0] * n  # 0 new, 1 on stack, 2 done
    for s in range(n):
        if state[s]:
            continue
        stack = [(s, iter(adj[s]))]
        state[s] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[v] = 2
                stack.pop()
            elif state[nxt] == 1:
                raise CycleError(f"directed cycle through node {nxt}")
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(adj[nxt])))


# common shapes -------------------------------------------------------------


def flat(n: int) -> NetworkTopology:
    """Root 0 with children 1..n-1."""
    return validate_topology([(0, j) for j in range(1, n)], n)


def chain(n: int) -> NetworkTopology:
    return validate_topology([(j - 1, j) for j in range(1, n)], n)


def balanced(d: int, D: int) -> NetworkTopology:
    """Complete ``d``-ary tree of depth ``D`` numbered breadth first."""
    if d < 1 or D < 0:
        raise ValidationError("balanced tree needs d >= 1 and D >= 0")
    edges = []
    level = [0]
    nxt = 1
    for _ in range(D):
        new_level = []
        for p in level:
            for _ in range(d):
                edges.append((p, nxt))
                new_level.append(nxt)
                nxt += 1
        level = new_level
    return validate_topology(edges, nxt)


def random_hierarchy(n: int, rng: np.random.Generator) -> NetworkTopology:
    """Uniform random recursive tree: node j picks a parent among 0..j-1."""
    edges = [(int(rng.integers(0, j)), j) for j in range(1, n)]
    return validate_topology(edges, n)


def balanced_shape(net: NetworkTopology) -> tuple[int, int] | None:
    """Return ``(d, D)`` if ``net`` is a complete d-ary tree of depth D >= 1."""
    if net.kind is not Kind.HIERARCHY or net.n < 2:
        return None
    d = len(net.children[0])
    leaf_depths = {int(net.depth[i]) for i in net.leaves}
    if len(leaf_depths) != 1:
        return None
    if any(len(c) not in (0, d) for c in net.children):
        return None
    return d, leaf_depths.pop()


# --------------------------------------------------------------------------
# parameters and models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Attenuation:
    """Per-influencer attenuation ``mu(C)`` by number of children ``C``."""

    kind: str = "one"
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("one", "power"):
            raise ValidationError(f"unknown attenuation kind {self.kind!r}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValidationError(f"attenuation exponent must be >= 0, got {self.alpha}")

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        if self.kind == "one":
            return np.ones_like(c)
        # leaves (c = 0) never act as influencers; give them a harmless 1
        return np.where(c >= 1, np.maximum(c, 1.0) ** (-self.alpha), 1.0)


MU_ONE = Attenuation()


def mu_power(alpha: float) -> Attenuation:
    return Attenuation("power", float(alpha))


@dataclass(frozen=True)
class EpParams:
    beta: float
    b: float = 0.0
    mu: Attenuation = MU_ONE

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValidationError(f"beta must be finite and >= 0, got {self.beta}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise ValidationError(f"b must be finite and >= 0, got {self.b}")

    @property
    def budget(self) -> float:
        """Per-node reward-share budget ``(1+b)/beta^2`` (inf at beta = 0)."""
        return math.inf if self.beta == 0 else (1 + self.b) / self.beta**2


class ProductivityModel:
    """Product-of-factors productivity ``p_j = prod_{k in R_j} phi_k(x_k)``."""

    #: factors are strictly positive for every x in [0,1]^n
    positive = False

    def factor(self, net, x):
        raise NotImplementedError

    def factor_slope(self, net, x):
        raise NotImplementedError


@dataclass(frozen=True)
class EpProduct(ProductivityModel):
    """``phi_k = mu(C_k) exp(-beta x_k)``."""

    params: EpParams
    positive = True

    def factor(self, net, x):
        return self.params.mu(net.child_counts) * np.exp(-self.params.beta * np.asarray(x, dtype=float))

    def factor_slope(self, net, x):
        return -self.params.beta * self.factor(net, x)

    def log_slope(self, net, x):
        """``phi'/phi``, constant for this model."""
        return np.full(np.shape(x), -self.params.beta)


@dataclass(frozen=True)
class LinearProduct(ProductivityModel):
    """``phi_k = 1 - x_k``."""

    def factor(self, net, x):
        return 1.0 - np.asarray(x, dtype=float)

    def factor_slope(self, net, x):
        return -np.ones(np.shape(x))


@dataclass(frozen=True)
class EpQuadratic:
    """Direct payoff ``f(x) = x - x^2/2 - b (1-x)^2/2``."""

    b: float = 0.0

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return x - x**2 / 2 - self.b * (1 - x) ** 2 / 2

    def fprime(self, x):
        return (1 + self.b) * (1 - np.asarray(x, dtype=float))

    def ell(self, y):
        """Inverse of ``f'``."""
        return 1 - np.asarray(y, dtype=float) / (1 + self.b)

    def ell_slope(self, y):
        return np.full(np.shape(y), -1 / (1 + self.b))


# --------------------------------------------------------------------------
# reward schemes and effort profiles
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RewardScheme:
    """Sparse reward shares ``h[i, j]`` paid by influencee ``j`` to ``i``."""

    n: int
    shares: Mapping[tuple[int, int], float] = field(default_factory=dict)

    @classmethod
    def zero(cls, net: NetworkTopology) -> RewardScheme:
        return cls(net.n, {})

    @classmethod
    def from_entries(cls, net: NetworkTopology, entries) -> RewardScheme:
        """Build from a mapping or ``(i, j, h)`` triples, validating support."""
        items = entries.items() if isinstance(entries, Mapping) else (((i, j), h) for i, j, h in entries)
        shares = {}
        for (i, j), h in items:
            i, j, h = int(i), int(j), float(h)
            if not (0 <= i < net.n and 0 <= j < net.n):
                raise ValidationError(f"share ({i}, {j}) references a node outside the network")
            if j not in net.descendants[i]:
                raise NotDescendant(f"node {j} is not an influencee of node {i}")
            if not (math.isfinite(h) and h >= 0):
                raise ValidationError(f"share h[{i},{j}] must be finite and >= 0, got {h}")
            if h > 0:
                shares[(i, j)] = shares.get((i, j), 0.0) + h
        return cls(net.n, shares)

    @classmethod
    def from_dense(cls, net: NetworkTopology, H) -> RewardScheme:
        H = np.asarray(H, dtype=float)
        return cls.from_entries(net, {(int(i), int(j)): H[i, j] for i, j in zip(*np.nonzero(H))})

    @cached_property
    def dense(self) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        for (i, j), h in self.shares.items():
            H[i, j] = h
        H.setflags(write=False)
        return H

    def triples(self) -> list[tuple[int, int, float]]:
        return [(i, j, h) for (i, j), h in sorted(self.shares.items())]

    def row_sums(self) -> np.ndarray:
        return self.dense.sum(axis=1)

    def scaled(self, c: float) -> RewardScheme:
        return RewardScheme(self.n, {k: v * c for k, v in self.shares.items()})

    def __eq__(self, other):
        if not isinstance(other, RewardScheme):
            return NotImplemented
        return self.n == other.n and dict(self.shares) == dict(other.shares)


def from_retained_shares(net: NetworkTopology, s: Mapping[tuple[int, int], float], gamma: float) -> RewardScheme:
    """Rescale raw output shares ``s[i, j]`` by the retained fraction ``gamma``.

    Each influencee keeps ``gamma`` of its own output, so the shares it pays
    upstream must total at most ``1 - gamma``.
    """
    if not (0 < gamma <= 1):
        raise NonPositiveGamma(f"gamma must lie in (0, 1], got {gamma}")
    col = {}
    for (i, j), v in s.items():
        if v < 0:
            raise ValidationError(f"raw share s[{i},{j}] is negative")
        col[j] = col.get(j, 0.0) + v
    for j, total in col.items():
        if total > 1 - gamma + 1e-12:
            raise BudgetViolated(f"influencee {j} shares {total} > 1 - gamma = {1 - gamma}")
    return RewardScheme.from_entries(net, {k: v / gamma for k, v in s.items()})


def effort_profile(x, n: int | None = None) -> np.ndarray:
    """Validate a production-effort vector in [0,1]^n and return a float array."""
    x = np.array(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("effort profile must be one-dimensional")
    if n is not None and x.shape[0] != n:
        raise ValidationError(f"effort profile has {x.shape[0]} entries, network has {n} nodes")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValidationError("efforts must lie in [0, 1]")
    return x


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def productivity_vector(net: NetworkTopology, model: ProductivityModel, x) -> np.ndarray:
    """All productivities at once; accepts a single profile or a batch (S, n)."""
    phi = model.factor(net, x)
    A = net.anc_matrix
    if model.positive:
        return np.exp(np.log(phi) @ A)
    if phi.ndim == 1:
        return np.where(A, phi[:, None], 1.0).prod(axis=0)
    return np.where(A[None], phi[:, :, None], 1.0).prod(axis=1)


def productivity(net, model, x, i: int) -> float:
    phi = model.factor(net, x)
    return float(np.prod([phi[k] for k in net.ancestors[i]]))


def fractional_productivity(net, model, x, i: int, j: int) -> float:
    """``p_ij = p_j / p_i``, the product of factors from ``i`` down to ``j``'s parent."""
    if j not in net.descendants[i]:
        raise NotDescendant(f"node {j} is not an influencee of node {i}")
    phi = model.factor(net, x)
    return float(np.prod([phi[k] for k in net.ancestors[j] - net.ancestors[i]]))


def productivity_partial(net, model, x, j: int, i: int) -> float:
    """``d p_j / d x_i``; zero unless ``i`` influences ``j``."""
    if i not in net.ancestors[j]:
        return 0.0
    phi = model.factor(net, x)
    slope = model.factor_slope(net, x)
    return float(slope[i] * np.prod([phi[k] for k in net.ancestors[j] if k != i]))


def social_output(net, model, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(productivity_vector(net, model, x) * x))


def outputs(net, model, x) -> np.ndarray:
    """Per-node direct outputs ``y_i = p_i x_i``."""
    x = np.asarray(x, dtype=float)
    return productivity_vector(net, model, x) * x


def efor_vector(net: NetworkTopology, model: ProductivityModel, H: RewardScheme, x) -> np.ndarray:
    """Effective fractional output rate of every node (batch-aware).

    ``g_i = sum_j h_ij * (-(1/p_i) dp_j/dx_i) * x_j``.  This is also the
    argument of ``f'^{-1}`` in the best-response map.
    """
    x = np.asarray(x, dtype=float)
    Hd = H.dense
    phi = model.factor(net, x)
    if model.positive:
        p = productivity_vector(net, model, x)
        rel = -model.factor_slope(net, x) / phi  # -(phi_i'/phi_i)
        return rel * ((p * x) @ Hd.T) / p
    if x.ndim == 1:
        return _efor_masked(net, model, Hd, x, phi)
    return np.stack([_efor_masked(net, model, Hd, xs, ps) for xs, ps in zip(x, phi)])


def _efor_masked(net, model, Hd, x, phi):
    # product over R_j \ R_i \ {i}, no division so zero factors are fine
    M = net.path_mask.copy()
    idx = np.arange(net.n)
    M[idx, idx, :] = False
    R = np.where(M, phi[:, None, None], 1.0).prod(axis=0)
    slope = model.factor_slope(net, x)
    return -slope * ((Hd * R) @ x)


def efor(net, model, H, x, i: int) -> float:
    return float(efor_vector(net, model, H, x)[i])


def payoff(net, model, payoff_fn, H: RewardScheme, x, i: int) -> float:
    """``u_i = p_i f(x_i) + sum_{j in E_i} h_ij p_j x_j``."""
    x = np.asarray(x, dtype=float)
    p = productivity_vector(net, model, x)
    return float(p[i] * payoff_fn.f(x[i]) + H.dense[i] @ (p * x))


def payoff_gradient(net, model, payoff_fn, H: RewardScheme, x, i: int) -> float:
    """Analytic ``du_i/dx_i = p_i (f'(x_i) - g_i)``."""
    x = np.asarray(x, dtype=float)
    p_i = productivity(net, model, x, i)
    indirect = sum(h * productivity_partial(net, model, x, j, i) * x[j] for (k, j), h in H.shares.items() if k == i)
    return float(p_i * payoff_fn.fprime(x[i]) + indirect)
