import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kaehlertwist.foliation import Foliation
from kaehlertwist.hermitian import (
    Z_INV,
    PhiProfile,
    Profile,
    abc_geometric_pair,
    abc_ode_residual,
    affine,
    balanced_residual,
    conformal_balanced,
    conformal_exponent,
    hermitian_form,
    omega_phi,
    parse_profile,
    positivity_margin,
    solution_family,
)

zs = np.linspace(0.6, 3.0, 9)


def const(v, name="c"):
    return Profile(lambda t: t * 0.0 + v, name)


def test_named_profiles():
    assert parse_profile("Z_INV") is Z_INV
    p = parse_profile("AFFINE(5, -1)")
    np.testing.assert_allclose(p(zs), 5 - zs)
    np.testing.assert_allclose(p.derivative(1)(zs), -1.0)
    np.testing.assert_allclose(p.derivative(2)(zs), 0.0, atol=1e-14)


def test_expression_grammar_and_exact_derivatives():
    p = parse_profile("exp(−z) + 3 × pow(z, −2) − 1 ÷ z + log(z)")
    e = np.exp(-zs)
    np.testing.assert_allclose(p(zs), e + 3 / zs**2 - 1 / zs + np.log(zs), rtol=1e-13)
    np.testing.assert_allclose(p.derivative(1)(zs), -e - 6 / zs**3 + 1 / zs**2 + 1 / zs, rtol=1e-12)
    np.testing.assert_allclose(p.derivative(2)(zs), e + 18 / zs**4 - 2 / zs**3 - 1 / zs**2, rtol=1e-12)


@pytest.mark.parametrize("text", ["__import__('os')", "z.real", "sin(z)", "y + 1", "lambda: 1", "z +"])
def test_grammar_rejects(text):
    with pytest.raises(ValueError):
        parse_profile(text)


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.floats(0.5, 3.0))
def test_derivatives_of_power_profiles(a, p, z):
    prof = parse_profile(f"{a} * z ** {p}")
    assert prof.derivative(1)(np.array([z]))[0] == pytest.approx(a * p * z ** (p - 1), rel=1e-10, abs=1e-12)
    assert prof.derivative(2)(np.array([z]))[0] == pytest.approx(a * p * (p - 1) * z ** (p - 2), rel=1e-10, abs=1e-12)


def test_profile_validation():
    Z_INV.validate(zs)
    with pytest.raises(ValueError, match="decreasing"):
        parse_profile("z").validate(zs)
    with pytest.raises(ValueError, match="positive"):
        affine(1.0, -1.0).validate(zs)


def test_omega_phi_for_reciprocal_profile(flat_c2):
    pts = flat_c2.sample(10, 0)
    fol = Foliation(flat_c2.pkg, flat_c2.split)
    z = flat_c2.z.values(pts)[:, None]
    expected = (fol.omega_minus.values(pts) - fol.omega_plus.values(pts)) / z**2
    np.testing.assert_allclose(omega_phi(flat_c2, Z_INV, pts).values(pts), expected, atol=1e-13)


def test_affine_profile_gives_kaehler_form(flat_c2):
    pts = flat_c2.sample(10, 0)
    _, r2 = balanced_residual(omega_phi(flat_c2, affine(5.0, -1.0), pts), pts)
    assert r2.max() <= 1e-12


def test_increasing_profile_rejected(flat_c2):
    with pytest.raises(ValueError):
        omega_phi(flat_c2, PhiProfile(lambda t: t, "z"), flat_c2.sample(4, 0))


def test_indefinite_family_has_negative_margin(flat_c2):
    margin = positivity_margin(flat_c2, hermitian_form(flat_c2, const(1.0), const(-1.0)), flat_c2.sample(4, 0))
    assert margin.max() < 0


def test_kaehler_form_is_balanced(s2_flat):
    r1, r2 = balanced_residual(s2_flat.omega, s2_flat.sample(8, 0))
    assert r1.max() <= 1e-12 and r2.max() <= 1e-12


def test_conformal_dichotomy_n2(flat_c2):
    rep = conformal_balanced(flat_c2, flat_c2.sample(16, 0))
    assert conformal_exponent(1, 2) == -1.0
    assert rep.passed
    assert rep["hermitian.balanced"].statistic <= 1e-7
    assert rep["hermitian.non_kaehler"].statistic >= 1e-3


def test_conformal_kaehler_n1(s2_flat):
    rep = conformal_balanced(s2_flat, s2_flat.sample(16, 0))
    assert rep.passed and rep["hermitian.kaehler"].statistic <= 1e-8


def test_product_has_no_defects(product):
    r1, r2 = balanced_residual(hermitian_form(product, const(1.0), const(1.0)), product.sample(8, 0))
    assert r1.max() == 0 and r2.max() <= 1e-15


@given(st.integers(1, 3), st.integers(1, 3), st.floats(0.2, 3.0), st.floats(0.5, 2.0), st.floats(0.0, 2.0))
def test_solution_family_solves_ode(m, n, a, p, b):
    phi = parse_profile(f"{a} * z ** (-{p}) + {b}")
    A, B = solution_family(phi, m, n)
    scale = np.abs(A(zs) * B(zs) / zs).max()
    assert abc_ode_residual(m, n, A, B, zs).max() <= 1e-10 * max(1.0, scale)


def test_solution_family_for_reciprocal_profile():
    A, B = solution_family(Z_INV, 1, 2)
    np.testing.assert_allclose(A(zs), 1 / zs)
    np.testing.assert_allclose(B(zs), 1 / zs)
    assert abc_ode_residual(1, 2, A, B, zs).max() <= 1e-10


def test_perturbed_b_is_a_witness():
    A, B = solution_family(Z_INV, 1, 2)
    bumped = Profile(lambda t: B(t) * 1.01, "1.01 B")
    assert abc_ode_residual(1, 2, A, bumped, zs).min() >= 1e-4


def test_linear_bump_is_a_homogeneous_solution():
    # B (1 + 0.01 z) = B + 0.01 z^{-1} A^{-(n-1)/m} z: the shift phi -> phi + 0.01
    A, B = solution_family(Z_INV, 1, 2)
    bumped = Profile(lambda t: B(t) * (1 + 0.01 * t), "B (1 + z/100)")
    assert abc_ode_residual(1, 2, A, bumped, zs).max() <= 1e-12


def test_constant_coefficients_residual():
    a = 0.7
    np.testing.assert_allclose(abc_ode_residual(2, 3, const(a), const(a), zs), 2 * 2 * a * a / zs, rtol=1e-12)


def test_ode_and_geometry_agree(flat_c2):
    pts = flat_c2.sample(10, 1)
    A, B = solution_family(Z_INV, flat_c2.m, flat_c2.n)
    good = abc_geometric_pair(flat_c2, A, B, pts)
    assert good.passed and good.metadata["ode_geometric_agree"]
    bad = abc_geometric_pair(flat_c2, A, Profile(lambda t: B(t) * 1.01, "1.01 B"), pts)
    assert not bad.passed and bad.metadata["ode_geometric_agree"]
