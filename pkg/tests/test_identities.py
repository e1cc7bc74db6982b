from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pinned_graph
from hsigma.fields import green_function, pinned
from hsigma.graph import build_exhaustion, build_host_graph, path_exhaustion, path_graph, single_edge, triangle
from hsigma.identities import (
    IdentityVerdict,
    MonteCarlo,
    consistency_check,
    enumerate_pairings,
    exact_pair,
    exp_ward_check,
    generalized_laplace_check,
    generating_term,
    importance_identity_check,
    laplace_check,
    letac_mc_check,
    martingale_step_check,
    martingale_term,
    nu_laplace_check,
    nu_laplace_closed_form,
    suite_passes,
    two_run,
    versus_exact,
    ward_identity_check,
)
from hsigma.measure import laplace_closed_form
from hsigma.sampler import ChainConfig, McEstimate

CFG = ChainConfig(seed=21, samples=200_000)


@pytest.fixture(scope="module")
def mc():
    return MonteCarlo(CFG)


def _field(graph, seed):
    return pinned(graph, np.random.default_rng(seed).normal(0, 0.8, graph.n - 1))


# --- pairings and hierarchy terms ------------------------------------------------------------


def test_pairing_examples():
    assert enumerate_pairings([]) == [()]
    assert enumerate_pairings([1, 2]) == [((1, 2),)]
    assert len(enumerate_pairings([1, 2, 3, 4])) == 3
    assert enumerate_pairings([1, 2, 3]) == []


@given(st.integers(0, 5))
def test_pairing_count_is_double_factorial(k):
    items = list(range(2 * k))
    pairings = enumerate_pairings(items)
    assert len(pairings) == math.prod(range(2 * k - 1, 0, -2))
    for p in pairings:
        assert sorted(itertools.chain.from_iterable(p)) == items
    assert len({tuple(sorted(p)) for p in pairings}) == len(pairings)


def test_martingale_term_small_orders():
    g = triangle(0.6)
    u = _field(g, 1)
    G = green_function(g, u)
    e = np.exp(u)
    j, k, l = 1, 2, 1
    assert martingale_term([j], u, G) == pytest.approx(e[j])
    assert martingale_term([j, k], u, G) == pytest.approx(e[j] * e[k] - G[j, k])
    expected = e[j] * e[k] * e[l] - e[j] * G[k, l] - e[k] * G[j, l] - e[l] * G[j, k]
    assert martingale_term([j, k, l], u, G) == pytest.approx(expected, rel=1e-13)


def test_martingale_term_empty_is_one():
    g = path_graph(2)
    u = _field(g, 2)
    assert martingale_term([], u, green_function(g, u)) == 1.0


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_pin_appended_term_reduces(seed, m):
    g = random_pinned_graph(seed)
    r = np.random.default_rng(seed)
    u = _field(g, seed)
    G = green_function(g, u)
    idx = list(r.integers(0, g.n, m))
    a = martingale_term(idx + [0], u, G)
    b = martingale_term(idx, u, G)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_generating_term_examples():
    g = single_edge()
    u = np.zeros(2)
    assert generating_term(np.zeros(2), u, green_function(g, u)) == 1.0
    assert generating_term([0.0, -1.0], u, green_function(g, u)) == pytest.approx(math.exp(-1.5))


@pytest.mark.parametrize("indices", [(1,), (2,), (1, 2), (2, 2), (1, 1, 2), (1, 2, 3), (2, 2, 2)])
def test_generating_term_derivatives_are_martingale_terms(indices):
    """Mixed central differences at θ = 0, step 1e-3."""
    g = path_graph(3, 0.8)
    u = _field(g, 7)
    G = green_function(g, u)
    h = 1e-3
    m = len(indices)
    total = 0.0
    for signs in itertools.product((1, -1), repeat=m):
        theta = np.zeros(g.n)
        for s, i in zip(signs, indices):
            theta[i] += s * h
        total += math.prod(signs) * float(generating_term(theta, u, G))
    deriv = total / (2 * h) ** m
    exact = float(martingale_term(list(indices), u, G))
    assert deriv == pytest.approx(exact, rel=1e-4)


# --- verdicts --------------------------------------------------------------------------------


def test_verdict_record():
    v = versus_exact("x", "anchor-x", McEstimate(1.1, 0.05, 1000.0, 5000), 1.0)
    assert v.score == pytest.approx(2.0) and v.passed
    rec = v.record()
    assert set(rec) >= {"suite", "anchor", "lhs", "rhs", "z", "pass"}
    e = exact_pair("y", "anchor-y", 1.0, 1.0 + 1e-9, 1e-10)
    assert not e.passed and "rel_err" in e.record()


def test_two_run_combines_errors():
    v = two_run("t", "a", McEstimate(1.0, 0.03, 1.0, 10), McEstimate(1.2, 0.04, 1.0, 10))
    assert v.score == pytest.approx(-4.0)
    assert not v.passed


def _stat(z):
    return IdentityVerdict("s", "a", 0.0, 0.0, z)


def test_suite_rule():
    assert suite_passes([_stat(0.1)] * 10)
    assert suite_passes([_stat(0.1)] * 30 + [_stat(3.5)])
    assert not suite_passes([_stat(0.1)] * 30 + [_stat(3.5), _stat(-4.0)])
    assert not suite_passes([_stat(0.0), IdentityVerdict("e", "a", 1, 2, 0.5, kind="exact", threshold=0.1)])


# --- exact cross-level checks ----------------------------------------------------------------


def test_consistency_example():
    host = build_host_graph([1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0)])
    ex = build_exhaustion(host, [[1], [1, 2]])
    (v,) = consistency_check(ex, 1, {1: 3.0})
    assert v.passed
    assert v.lhs == pytest.approx(math.exp(-1) / 2, rel=1e-14)
    assert v.rhs == pytest.approx(math.exp(-1) / 2, rel=1e-14)
    (z,) = consistency_check(ex, 1, {})
    assert z.lhs == z.rhs == 1.0


def test_consistency_rejects_lambda_outside_level():
    ex = path_exhaustion(2, [[0], [-1, 0, 1]])
    with pytest.raises(ValueError):
        consistency_check(ex, 1, {1: 0.5})


def test_nu_closed_form_single_vertex():
    assert nu_laplace_closed_form(single_edge(), [3.0]) == pytest.approx(0.5)


# --- Monte Carlo checks at a small budget ----------------------------------------------------


def test_ward_first_moment(mc):
    (v,) = ward_identity_check(path_graph(2), [2], mc)
    assert v.passed and v.rhs == 1.0


def test_ward_second_and_third(mc):
    g = path_graph(2)
    for idx in ([1, 2], [1, 2, 2]):
        (v,) = ward_identity_check(g, idx, mc)
        assert v.passed, v.record()


def test_exp_ward_targets(mc):
    re, im = exp_ward_check(single_edge(), [-1.0, -1.0], mc)
    assert re.rhs == pytest.approx(math.exp(-2))
    assert im.rhs == 0.0
    assert re.passed and im.passed


def test_exp_ward_theta_zero_is_exact(mc):
    re, im = exp_ward_check(path_graph(2), np.zeros(3), mc)
    assert re.lhs == 1.0 and re.score == 0.0 and im.lhs == 0.0


def test_positive_theta_rejected(mc):
    with pytest.raises(ValueError):
        exp_ward_check(single_edge(), [0.0, 0.5], mc)


def test_laplace_and_generalized(mc):
    g = path_graph(2)
    (v,) = laplace_check(g, [3.0, 0.0], mc)
    assert v.rhs == pytest.approx(math.exp(-2) / 2) and v.passed
    (w,) = generalized_laplace_check(single_edge(), [0.0, -1.0], [3.0], mc)
    assert w.rhs == pytest.approx(math.exp(-1) / 2 * math.exp(-2))
    assert w.passed


def test_generalized_laplace_degenerations(mc):
    g = triangle()
    (a,) = generalized_laplace_check(g, np.zeros(3), [1.0, 0.5], mc)
    (b,) = laplace_check(g, [1.0, 0.5], mc)
    assert a.lhs == pytest.approx(b.lhs) and a.rhs == pytest.approx(b.rhs)
    (c,) = generalized_laplace_check(g, [0.0, -0.5, -1.0], [0.0, 0.0], mc)
    assert c.rhs == pytest.approx(math.exp(-1.5))


def test_importance_identity_constant(mc):
    g = path_graph(2)
    lam = [1.0, 0.5]
    L = laplace_closed_form(g, lam)
    vs = importance_identity_check(g, lam, lambda b: np.ones(len(b.u)), mc, "1", closed_form=L)
    assert len(vs) == 3
    assert vs[2].lhs == pytest.approx(L)  # right-hand side is exactly L for g = 1
    assert all(v.passed for v in vs)


def test_importance_identity_exponential(mc):
    g = path_graph(2)
    lam = np.array([0.0, 1.0, 0.5])
    L = laplace_closed_form(g, lam)
    vs = importance_identity_check(g, lam, lambda b: np.exp(b.u[:, 2]), mc, "e^u", closed_form=L * math.sqrt(1.5))
    assert all(v.passed for v in vs), [v.record() for v in vs]


def test_martingale_step_first_order(mc):
    ex = path_exhaustion(2, [[0], [-1, 0, 1]])
    for idx in ([0], [1]):
        vs = martingale_step_check(ex, 1, {0: 0.5}, mc, indices=idx)
        assert len(vs) == 3 and all(v.passed for v in vs), [v.record() for v in vs]
    # outside V_1 the level-1 term is e^{u_pin} = 1, so the closed form is L_1
    vs = martingale_step_check(ex, 1, {0: 0.5}, mc, indices=[1])
    L1 = laplace_closed_form(path_graph(1, 2.0), [0.5])
    assert vs[1].rhs == pytest.approx(L1)


def test_martingale_generating_lambda_zero(mc):
    ex = path_exhaustion(2, [[0], [-1, 0, 1]])
    vs = martingale_step_check(ex, 1, {}, mc, theta={0: -1.0, 2: -0.5})
    assert vs[1].rhs == pytest.approx(math.exp(-1.5))
    assert all(v.passed for v in vs)


def test_martingale_needs_one_kind(mc):
    ex = path_exhaustion(2, [[0], [-1, 0, 1]])
    with pytest.raises(ValueError):
        martingale_step_check(ex, 1, {}, mc)


def test_nu_laplace_relation(mc):
    vs = nu_laplace_check(path_graph(2), [0.7, 0.2], mc)
    assert all(v.passed for v in vs), [v.record() for v in vs]
    with pytest.raises(ValueError):
        nu_laplace_check(triangle(), [0.1, 0.1], mc)


def test_letac_by_monte_carlo(mc):
    (v,) = letac_mc_check(path_graph(3), [0.5, 1.0, 0.3], mc)
    assert v.rhs == pytest.approx(math.exp(-1.8))
    assert v.passed


def test_monte_carlo_is_order_independent():
    a, b = path_graph(2), triangle()
    m1, m2 = MonteCarlo(CFG), MonteCarlo(CFG)
    f = lambda bb: np.exp(bb.u[:, 1])  # noqa: E731
    x1 = m1.estimate(a, f).mean
    y1 = m1.estimate(b, f).mean
    y2 = m2.estimate(b, f).mean
    x2 = m2.estimate(a, f).mean
    assert (x1, y1) == (x2, y2)
    assert m1.chain(a) is m1.chain(a)
