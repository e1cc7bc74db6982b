from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hsigma.graph import path_graph, single_edge
from hsigma.measure import single_edge_log_density
from hsigma.quadrature import (
    QuadratureSpec,
    cond_exp_closed_form,
    cond_exp_closed_form_check,
    letac_check,
    letac_lhs,
    letac_rhs,
    scaling_check,
    scaling_jacobian,
    scaling_reduction,
    single_edge_cdf,
    single_edge_normalization,
)

ROOT = math.sqrt(math.pi / 2)
W2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(epsrel=0)
    with pytest.raises(ValueError):
        QuadratureSpec(limit=0)


def test_letac_one_vertex_examples():
    assert letac_lhs(single_edge(), [1.0], [1.0]) == pytest.approx(ROOT / math.e, rel=1e-10)
    assert letac_lhs(single_edge(), [1.0], [1.0]) == pytest.approx(0.4610685, abs=1e-7)
    assert letac_lhs(np.zeros((1, 1)), [2.0], [1.0]) == pytest.approx(ROOT * math.exp(-2) / 2, rel=1e-10)


def test_letac_two_vertex_example():
    assert letac_lhs(W2, [1.0, 1.0], [1.0, 1.0]) == pytest.approx(math.pi / 2 * math.exp(-2), rel=1e-4)


def test_letac_accepts_graph():
    # only the interior weights enter
    assert letac_lhs(path_graph(2), [1.0, 1.0], [1.0, 1.0]) == pytest.approx(letac_rhs([1, 1], [1, 1]), rel=1e-4)


def test_letac_rhs_examples():
    assert letac_rhs([1.0], [1.0]) == pytest.approx(ROOT / math.e)
    assert letac_rhs([1.0, 1.0], [1e-300, 1e-300]) == pytest.approx(math.pi / 2)
    phi, theta = np.array([2.0, 0.5]), np.array([0.3, 1.7])
    assert letac_rhs(phi, theta) == pytest.approx(letac_rhs(np.ones(2), phi * theta) / phi.prod())


def test_letac_input_validation():
    with pytest.raises(ValueError):
        letac_lhs(W2, [1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        letac_lhs(np.zeros((3, 3)), np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        letac_lhs(W2, [1.0], [1.0])


@given(st.sampled_from([0.5, 1, 2, 4, 8]), st.sampled_from([0.5, 1, 2, 4, 8]))
@settings(max_examples=25)
def test_letac_one_vertex_grid(phi, theta):
    v = letac_check(np.zeros((1, 1)), [phi], [theta], 1e-6)
    assert v.passed, v.record()


def test_scaling_examples():
    theta, W = scaling_reduction([1.0, 1.0], [0.3, 0.4], W2)
    np.testing.assert_array_equal(theta, [0.3, 0.4])
    np.testing.assert_array_equal(W, W2)
    assert scaling_jacobian([2.0, 3.0]) == pytest.approx(1 / 36)
    assert scaling_check(np.zeros((1, 1)), [2.0], [1.0], 1e-6).passed


def test_scaling_two_vertices():
    assert scaling_check(W2, [2.0, 3.0], [0.5, 0.25], 1e-4).passed


def test_cone_boundary_mutation_is_detected():
    good = letac_check(W2, [1.0, 1.0], [0.05, 0.05], 1e-4)
    assert good.passed
    for scale in (0.99, 1.01):
        bad = letac_check(W2, [1.0, 1.0], [0.05, 0.05], 1e-4, QuadratureSpec(cone_scale=scale))
        assert not bad.passed


def test_cond_exp_examples():
    assert cond_exp_closed_form(1.0, 0.0) == 1.0
    assert cond_exp_closed_form(1.0, 1.5) == pytest.approx(math.exp(-1))
    assert cond_exp_closed_form(1.0, 4.0) == pytest.approx(math.exp(-2))
    for c in (0.0, 1.5, 4.0):
        assert cond_exp_closed_form_check(1.0, c).passed


def test_cond_exp_validation():
    with pytest.raises(ValueError):
        cond_exp_closed_form_check(0.0, 1.0)
    with pytest.raises(ValueError):
        cond_exp_closed_form_check(1.0, -1.0)


@given(st.floats(0.1, 10.0), st.floats(0.0, 10.0))
@settings(max_examples=30)
def test_cond_exp_property(w, c):
    v = cond_exp_closed_form_check(w, c)
    assert v.score <= 1e-8


def test_single_edge_cdf():
    F = single_edge_cdf(1.0)
    assert F(-100.0) == 0.0 and F(100.0) == 1.0
    left, _ = integrate.quad(lambda t: math.exp(single_edge_log_density(t, 1.0)), -60.0, 0.0)
    assert F(0.0) == pytest.approx(left, abs=1e-6)
    assert np.all(np.diff(F(np.linspace(-10, 5, 200))) >= 0)
    assert single_edge_normalization(2.0) == pytest.approx(1.0, abs=1e-10)
