import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kaehlertwist import jets as jt
from kaehlertwist.geometry import central_difference

coords = st.floats(-1.5, 1.5, allow_nan=False)
pos = st.floats(0.2, 3.0, allow_nan=False)


def seed(*xs, order=2):
    return jt.variables(np.array([xs]), order)


def test_variables_have_unit_gradient():
    x = seed(0.3, -0.7)
    np.testing.assert_allclose(x[:, 0].gradient[0], [1.0, 0.0])
    np.testing.assert_allclose(x[:, 1].gradient[0], [0.0, 1.0])


def test_polynomial_hessian_matches_hand_values():
    x = seed(0.5, 2.0)
    u, v = x[:, 0], x[:, 1]
    f = u * u * v + 3.0 * v * v * v
    assert f.value[0] == pytest.approx(0.5 * 0.5 * 2 + 24)
    np.testing.assert_allclose(f.gradient[0], [2 * 0.5 * 2, 0.25 + 9 * 4])
    np.testing.assert_allclose(f.hessian[0], [[4.0, 1.0], [1.0, 36.0]])


@given(coords, coords)
def test_product_rule(a, b):
    x = seed(a, b)
    u, v = x[:, 0], x[:, 1]
    f, g = jt.sin(u) + v, jt.exp(v) * u
    lhs = (f * g).gradient
    rhs = f.gradient * g.value[:, None] + g.gradient * f.value[:, None]
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@given(pos)
def test_exp_log_inverse_to_third_order(a):
    x = jt.variables(np.array([[a]]), 3)[:, 0]
    np.testing.assert_allclose(jt.exp(jt.log(x)).c, x.c, atol=1e-11)


@given(pos, st.floats(-2.5, 2.5))
def test_power_derivatives(a, p):
    x = jt.variables(np.array([[a]]), 2)[:, 0]
    y = jt.power(x, p)
    assert y.derivative(1)[0, 0] == pytest.approx(p * a ** (p - 1), rel=1e-12, abs=1e-12)
    assert y.derivative(2)[0, 0, 0] == pytest.approx(p * (p - 1) * a ** (p - 2), rel=1e-12, abs=1e-12)


@given(coords, coords)
def test_jet_gradient_agrees_with_central_difference(a, b):
    def f(xy):
        u, v = xy[..., 0], xy[..., 1]
        return np.cos(u * v) + np.sqrt(1.0 + u * u) * v

    x = seed(a, b, order=1)
    u, v = x[:, 0], x[:, 1]
    jet_grad = (jt.cos(u * v) + jt.power(1.0 + u * u, 0.5) * v).gradient
    fd = central_difference(f, np.array([[a, b]]))
    np.testing.assert_allclose(jet_grad, fd, atol=1e-6)


def test_matrix_inverse_jet(rng):
    m0 = rng.normal(size=(3, 3)) + 4 * np.eye(3)
    x = jt.variables(rng.normal(size=(2, 2)), 2)
    m = jt.constant(np.broadcast_to(m0, (2, 3, 3)), x) + jt.jeinsum("...,ij->...ij", x[:, 0], np.ones((3, 3))) * 0.3
    prod = jt.jeinsum("...ij,...jk->...ik", m, jt.inv(m))
    np.testing.assert_allclose(prod.c[..., 0], np.broadcast_to(np.eye(3), (2, 3, 3)), atol=1e-12)
    np.testing.assert_allclose(prod.c[..., 1:], 0.0, atol=1e-12)


def test_compose_needs_enough_derivatives():
    x = jt.variables(np.array([[0.4]]), 2)[:, 0]
    with pytest.raises(IndexError):
        jt.compose(x, [np.array([1.0])])
