from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kaehlertwist import jets as jt
from kaehlertwist.fields import KForm, ScalarField, VectorField
from kaehlertwist.forms import (
    evaluate_form,
    exterior_derivative,
    interior_product,
    lie_derivative,
    lie_form_coordinates,
    lift,
    wedge,
)

seeds = st.integers(0, 2**32 - 1)


def poly_form(d, k, seed):
    """Random form with quadratic-plus-sine coefficients."""
    rng = np.random.default_rng(seed)
    n = comb(d, k)
    lin, quad, const = rng.normal(size=(n, d)), rng.normal(size=(n, d)), rng.normal(size=n)

    def fn(c):
        comps = []
        for i in range(n):
            v = c.const(const[i])
            for a in range(d):
                v = v + c[a] * lin[i, a] + jt.sin(c[a] * c[(a + 1) % d]) * quad[i, a]
            comps.append(v)
        return jt.stack(comps, -1)

    return KForm(fn, d, k, 0, f"poly{k}")


def poly_vector(d, seed):
    rng = np.random.default_rng(seed)
    A, b = rng.normal(size=(d, d)), rng.normal(size=d)
    return VectorField(lambda c: jt.stack([sum(c[j] * A[i, j] for j in range(d)) + b[i] for i in range(d)], -1),
                       d, 0, "X")


def sample(d, n=5, seed=0):
    return np.random.default_rng(seed).uniform(-0.8, 0.8, size=(n, d))


@given(seeds, st.integers(0, 2))
def test_d_squared_vanishes(seed, k):
    d = 4
    a = poly_form(d, k, seed) if k else ScalarField(lambda c: jt.exp(c[0] * c[1]) + c[2] * c[3] ** 2, d, 0)
    dd = exterior_derivative(exterior_derivative(a))
    np.testing.assert_allclose(dd.values(sample(d)), 0.0, atol=1e-10)


@given(seeds, st.integers(1, 2), st.integers(1, 2))
def test_leibniz_rule(seed, k, l):
    d = 5
    a, b = poly_form(d, k, seed), poly_form(d, l, seed + 1)
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)) * float((-1) ** k)
    np.testing.assert_allclose((lhs - rhs).values(sample(d)), 0.0, atol=1e-10)


def test_wedge_normalisation():
    dx = KForm(lambda c: c.const(np.array([1.0, 0.0])), 2, 1)
    dy = KForm(lambda c: c.const(np.array([0.0, 1.0])), 2, 1)
    pts = np.zeros((1, 2))
    val = evaluate_form(wedge(dx, dy), pts, [np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    assert val[0] == pytest.approx(1.0)
    assert evaluate_form(wedge(dy, dx), pts, [np.array([1.0, 0.0]), np.array([0.0, 1.0])])[0] == pytest.approx(-1.0)


@given(seeds, st.integers(1, 3))
def test_cartan_formula_matches_coordinate_lie_derivative(seed, k):
    d = 4
    a, X = poly_form(d, k, seed), poly_vector(d, seed + 7)
    diff = lie_derivative(X, a) - lie_form_coordinates(X, a)
    np.testing.assert_allclose(diff.values(sample(d)), 0.0, atol=1e-10)


@given(seeds)
def test_interior_product_is_antiderivation(seed):
    d = 5
    a, b, X = poly_form(d, 1, seed), poly_form(d, 2, seed + 1), poly_vector(d, seed + 2)
    lhs = interior_product(X, wedge(a, b))
    rhs = wedge(interior_product(X, a), b) - wedge(a, interior_product(X, b))
    np.testing.assert_allclose((lhs - rhs).values(sample(d)), 0.0, atol=1e-10)


def test_interior_product_squares_to_zero():
    d = 4
    X = poly_vector(d, 3)
    twice = interior_product(X, interior_product(X, poly_form(d, 3, 5)))
    np.testing.assert_allclose(twice.values(sample(d)), 0.0, atol=1e-12)


def test_lift_commutes_with_d_and_ignores_other_factor():
    a = poly_form(2, 1, 11)
    up = lift(a, 5, 2)
    pts = sample(5)
    np.testing.assert_allclose(exterior_derivative(up).values(pts), lift(exterior_derivative(a), 5, 2).values(pts), atol=1e-12)
    moved = pts.copy()
    moved[:, [0, 1, 4]] += 0.3
    np.testing.assert_allclose(up.values(pts), up.values(moved), atol=0)


def test_top_degree_derivative_is_refused():
    with pytest.raises(ValueError):
        exterior_derivative(poly_form(2, 2, 0))
