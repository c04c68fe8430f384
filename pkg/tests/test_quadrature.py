from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmfem.quadrature import MAX_DEGREE, edge_rule, triangle_rule


def tri_monomial_exact(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def test_weights_sum_to_reference_measure():
    for d in range(MAX_DEGREE + 1):
        r = triangle_rule(d)
        assert abs(r.weights.sum() - 0.5) < 1e-14
        assert np.all(np.isfinite(r.weights))
        e = edge_rule(d)
        assert abs(e.weights.sum() - 1.0) < 1e-14


def test_constant_integral():
    r = triangle_rule(7)
    assert abs(r.weights.sum() - 0.5) < 1e-15


def test_x2y_on_triangle():
    r = triangle_rule(3)
    x, y = r.xy[:, 0], r.xy[:, 1]
    val = np.sum(r.weights * x ** 2 * y)
    assert abs(val - 1 / 60) < 1e-15
    assert tri_monomial_exact(2, 1) == Fraction(1, 60)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 6, 8, 12, 16, 21, 30])
def test_monomial_exactness_full_basis(degree):
    r = triangle_rule(degree)
    assert r.exact_degree >= degree
    x, y = r.xy[:, 0], r.xy[:, 1]
    for total in range(r.exact_degree + 1):
        for a in range(total + 1):
            b = total - a
            val = np.sum(r.weights * x ** a * y ** b)
            exact = float(tri_monomial_exact(a, b))
            assert abs(val - exact) < 1e-13, (a, b, val, exact)


@given(st.integers(0, MAX_DEGREE), st.data())
@settings(max_examples=40, deadline=None)
def test_monomial_exactness_property(degree, data):
    r = triangle_rule(degree)
    a = data.draw(st.integers(0, degree))
    b = data.draw(st.integers(0, degree - a))
    x, y = r.xy[:, 0], r.xy[:, 1]
    val = np.sum(r.weights * x ** a * y ** b)
    assert abs(val - float(tri_monomial_exact(a, b))) < 1e-13


def test_edge_rule_basics():
    r = edge_rule(3)
    assert abs(np.sum(r.weights) - 1.0) < 1e-15
    assert abs(np.sum(r.weights * r.points ** 3) - 0.25) < 1e-15


@given(st.integers(0, 40))
@settings(max_examples=30, deadline=None)
def test_edge_monomial_exactness(d):
    r = edge_rule(d)
    for m in range(r.exact_degree + 1):
        val = np.sum(r.weights * r.points ** m)
        assert abs(val - 1 / (m + 1)) < 1e-13


def test_unsupported_degree():
    with pytest.raises(ValueError):
        triangle_rule(MAX_DEGREE + 1)
    with pytest.raises(ValueError):
        triangle_rule(-1)
