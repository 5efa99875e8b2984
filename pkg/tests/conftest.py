import math

import numpy as np
import pytest
from hypothesis import settings

from effortnet.model import (
    EpParams,
    EpProduct,
    EpQuadratic,
    RewardScheme,
    flat,
    random_hierarchy,
    validate_topology,
)

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

TIGHT_X1 = 0.7968121300204166  # root of 1 - x = exp(-2x), bisection oracle


class Instance:
    def __init__(self, net, params, H):
        self.net = net
        self.params = params
        self.H = H
        self.model = EpProduct(params)
        self.payoff_fn = EpQuadratic(params.b)

    def args(self):
        return self.net, self.model, self.payoff_fn, self.H


def tightness_instance():
    net = validate_topology([(0, 1), (0, 2)], 3)
    H = RewardScheme.from_entries(net, {(0, 1): 0.25, (0, 2): 0.25})
    return Instance(net, EpParams(2.0, 0.0), H)


def flat_instance(n, beta, b=0.0):
    net = flat(n)
    return Instance(net, EpParams(beta, b), RewardScheme.zero(net))


def random_scheme(net, rng, density=0.6, scale=1.0):
    shares = {}
    for i in range(net.n):
        for j in sorted(net.descendants[i]):
            if rng.uniform() < density:
                shares[(i, j)] = scale * rng.uniform()
    return RewardScheme.from_entries(net, shares)


def random_instance(rng, n_max=12, ratio=None):
    """Random EP hierarchy; if ``ratio`` is given, H is scaled so beta^2 h_max/(1+b) = ratio."""
    n = int(rng.integers(2, n_max + 1))
    net = random_hierarchy(n, rng)
    beta = float(rng.uniform(0.1, 3.0))
    b = float(rng.uniform(0.0, 1.0))
    H = random_scheme(net, rng)
    if not H.shares:
        i = next(k for k in range(n) if net.descendants[k])
        H = RewardScheme.from_entries(net, {(i, min(net.descendants[i])): 0.5})
    if ratio is not None:
        H = H.scaled(ratio * (1 + b) / (beta**2 * H.row_sums().max()))
    return Instance(net, EpParams(beta, b), H)


def naive_productivity(net, params, x, i):
    """Independent walk up the parent chain."""
    p = 1.0
    k = net.parent[i]
    while k >= 0:
        p *= params.mu(len(net.children[k])) * math.exp(-params.beta * x[k])
        k = net.parent[k]
    return float(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tight():
    return tightness_instance()


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[k])
