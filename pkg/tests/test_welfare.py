import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize

from conftest import flat_instance, random_instance
from effortnet.design import check_stability
from effortnet.errors import DegenerateOutput, DomainError, NearDegenerateWarning, TooLarge
from effortnet.model import (
    EpParams,
    EpProduct,
    EpQuadratic,
    LinearProduct,
    balanced,
    flat,
    productivity_vector,
    random_hierarchy,
    social_output,
)
from effortnet.welfare import (
    OptimalMethod,
    opt_threshold,
    optimal_effort,
    phi,
    poa,
    poa_bound_balanced,
    xi,
)


def scipy_optimum(net, model, samples=200_000, polish=20, seed=0):
    """Independent oracle: uniform random search, best samples polished by L-BFGS-B."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(samples, net.n))
    vals = np.sum(productivity_vector(net, model, X) * X, axis=1)
    top = X[np.argsort(vals)[-polish:]]

    def neg(x):
        return -social_output(net, model, x)

    best = float(vals.max())
    for x0 in top:
        r = minimize(neg, x0, method="L-BFGS-B", bounds=[(0, 1)] * net.n)
        best = max(best, -float(r.fun))
    return best


def vertex_optimum(net, model):
    X = np.array(list(itertools.product((0.0, 1.0), repeat=net.n)))
    return float(np.max(np.sum(productivity_vector(net, model, X) * X, axis=1)))


# ---- optimum ----------------------------------------------------------------


def test_flat_optimum_above_threshold():
    net = flat(5)
    opt = optimal_effort(net, EpProduct(EpParams(math.log(4))))
    np.testing.assert_array_equal(opt.x, [0, 1, 1, 1, 1])
    assert opt.so == pytest.approx(4.0, abs=1e-14)
    assert opt.method is OptimalMethod.CLOSED_FORM_BALANCED


def test_flat_optimum_below_threshold():
    assert opt_threshold(4) == pytest.approx(-math.log(0.75))
    opt = optimal_effort(flat(5), EpProduct(EpParams(0.1)))
    np.testing.assert_array_equal(opt.x, 1.0)
    assert opt.method is OptimalMethod.CLOSED_FORM_FLAT


def test_balanced_optimum_against_oracles():
    net = balanced(2, 2)
    model = EpProduct(EpParams(0.8))
    closed = optimal_effort(net, model)
    brute = optimal_effort(net, model, method="brute")
    assert brute.method is OptimalMethod.BRUTE_FORCE
    ref = scipy_optimum(net, model)
    assert closed.so == pytest.approx(ref, abs=1e-6)
    assert brute.so == pytest.approx(ref, abs=1e-6)
    assert vertex_optimum(net, model) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("d,D,beta", [(2, 2, 0.3), (3, 2, 0.2), (2, 3, 0.5), (6, 1, 0.15), (1, 3, 0.4)])
def test_balanced_brute_force_below_threshold(d, D, beta):
    net = balanced(d, D)
    model = EpProduct(EpParams(beta))
    opt = optimal_effort(net, model)
    assert opt.so == pytest.approx(vertex_optimum(net, model), abs=1e-9)
    assert np.all(opt.x[list(net.leaves)] == 1)


def test_non_balanced_brute_force_against_oracles():
    rng = np.random.default_rng(21)
    for _ in range(8):
        net = random_hierarchy(int(rng.integers(3, 10)), rng)
        for model in (EpProduct(EpParams(rng.uniform(0.05, 3.0))), LinearProduct()):
            opt = optimal_effort(net, model)
            assert opt.method is OptimalMethod.BRUTE_FORCE
            assert np.all(opt.x[list(net.leaves)] == 1)
            assert opt.so == pytest.approx(vertex_optimum(net, model), abs=1e-9)
            assert opt.so >= scipy_optimum(net, model, samples=20_000, polish=5) - 1e-6


def test_brute_force_size_cap():
    net = random_hierarchy(14, np.random.default_rng(0))
    with pytest.raises(TooLarge):
        optimal_effort(net, EpProduct(EpParams(1.0)))


@pytest.mark.parametrize("d,D", [(2, 2), (3, 1), (3, 2), (2, 3)])
def test_threshold_behaviour(d, D):
    beta = opt_threshold(d) + 1e-3
    net = balanced(d, D)
    model = EpProduct(EpParams(beta))
    closed = optimal_effort(net, model)
    brute = optimal_effort(net, model, method="brute")
    assert closed.so == pytest.approx(brute.so, abs=1e-4)


# ---- PoA --------------------------------------------------------------------


@pytest.mark.parametrize("n,expected", [(5, 2.0), (7, 3.0)])
def test_large_poa_examples(n, expected):
    inst = flat_instance(n, math.log(n - 1))
    rep = poa(*inst.args())
    assert rep.poa == pytest.approx(expected, abs=1e-12)
    assert rep.so_optimal / rep.so_equilibrium == rep.poa


@pytest.mark.parametrize("d,D,beta", [(2, 1, 0.5), (2, 2, 0.8), (3, 2, 1.0)])
def test_poa_one_under_stable_construction(d, D, beta):
    net = balanced(d, D)
    params = EpParams(beta)
    model = EpProduct(params)
    opt = optimal_effort(net, model)
    st_ = check_stability(net, params, opt.x)
    rep = poa(net, model, EpQuadratic(), st_.H, optimal=opt)
    assert rep.poa == pytest.approx(1.0, abs=1e-6)


def test_poa_at_least_one_and_multiplicity_note(tight):
    rng = np.random.default_rng(22)
    for _ in range(20):
        inst = random_instance(rng, n_max=9, ratio=rng.uniform(0.2, 2.0))
        assert poa(*inst.args()).poa >= 1 - 1e-6
    assert poa(*tight.args()).multiplicity_note


def test_poa_degenerate(monkeypatch):
    # equilibria always keep the root productive, so force a zero-output result
    import effortnet.welfare as welfare
    from effortnet.equilibrium import EquilibriumResult, Method

    inst = flat_instance(3, 1.0)

    def zero_eq(*args, **kwargs):
        return EquilibriumResult(np.zeros(3), np.zeros(3), 0.0, 0, Method.TREE)

    monkeypatch.setattr(welfare, "solve_equilibrium", zero_eq)
    with pytest.raises(DegenerateOutput) as exc:
        welfare.poa(*inst.args())
    assert exc.value.poa == math.inf


# ---- xi, phi and the balanced bound ----------------------------------------


def test_xi_examples():
    ref = brentq(lambda t: t - 1 + math.exp(-2 * t) / 2, 0.5, 1.0, xtol=1e-15)
    assert xi(2.0) == pytest.approx(ref, abs=1e-11)
    assert xi(2.0) == pytest.approx(0.92068, abs=5e-5)
    assert xi(50.0) > 0.999
    with pytest.raises(DomainError):
        xi(1.0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        v = xi(1 + 1e-9)
    assert any(issubclass(c.category, NearDegenerateWarning) for c in w)
    assert 0 <= v <= 1


@settings(max_examples=100, deadline=None)
@given(beta=st.floats(1.001, 40))
def test_xi_residual(beta):
    v = xi(beta)
    assert abs(v - 1 + math.exp(-beta * v) / beta) <= 1e-12


def test_bound_examples():
    assert poa_bound_balanced(3, 2, 0.5).bound == 1
    rep = poa_bound_balanced(6, 1, 2.0)
    x2 = xi(2.0)
    naive = (1 + math.log(12)) / 2
    assert naive == pytest.approx(1.7425, abs=5e-5)
    assert rep.phi_sequence[0] == pytest.approx(12 + (1 - 12) * x2, abs=1e-12)
    assert rep.phi_sequence[0] == pytest.approx(1.8727, abs=5e-4)
    assert rep.bound == pytest.approx(6 / rep.phi_sequence[0], rel=1e-14)
    assert rep.bound == pytest.approx(3.204, abs=1e-3)
    one = poa_bound_balanced(1, 1, 2.0)
    assert one.phi_sequence[0] == pytest.approx(2 - x2, abs=1e-12)
    assert one.raw_bound < 1 and one.bound == 1 and one.clamped


def test_bound_nested_sequence():
    rep = poa_bound_balanced(3, 3, 2.5)
    x = xi(2.5)
    t1 = phi(3, 2.5, x)
    t2 = phi(3 * t1, 2.5, x)
    t3 = phi(3 * t2, 2.5, x)
    assert rep.phi_sequence == [t1, t2, t3]
    assert rep.bound == pytest.approx(27 / t3)


def test_bound_domain():
    for bad in [(0, 1, 2.0), (2, 0, 2.0), (2, 1, -1.0), (2.5, 1, 2.0)]:
        with pytest.raises(DomainError):
            poa_bound_balanced(*bad)
