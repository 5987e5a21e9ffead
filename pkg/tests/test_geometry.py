import numpy as np
import pytest

from kaehlertwist import jets as jt
from kaehlertwist.fields import ChartDomain, EndoField, MetricField, ScalarField
from kaehlertwist.geometry import (
    SingularMetricError,
    laplacian,
    lstar,
    nijenhuis,
    ricci_field,
    riemann_ricci_scalar,
    scalar_curvature_field,
)
from kaehlertwist.kaehler import flat_disk, round_s2, standard_complex_structure


def conformal_plane(weight):
    """``e^{2u} delta`` on the plane; scalar curvature is ``-2 e^{-2u} lap_flat u``."""
    return MetricField(lambda c: jt.jeinsum("...,ab->...ab", jt.exp(weight(c) * 2.0), np.eye(2)), 2, 0, "g")


def test_flat_metric_has_no_curvature():
    g = flat_disk(2).pkg.g
    R, Ric, s = riemann_ricci_scalar(g, ChartDomain.box(4, 1.0).sample(6, 0))
    assert np.abs(R).max() == 0 and np.abs(Ric).max() == 0 and np.abs(s).max() == 0


def test_round_sphere_curvature_oracle():
    pts = ChartDomain.box(2, 1.0).sample(20, 3)
    g = round_s2().pkg.g
    np.testing.assert_allclose(scalar_curvature_field(g).values(pts), 2.0, atol=1e-12)
    np.testing.assert_allclose(ricci_field(g).values(pts), g.values(pts), atol=1e-12)


def test_conformal_plane_scalar_curvature():
    # u = x^2 y / 3 + y: lap_flat u = 2y / 3
    g = conformal_plane(lambda c: c[0] * c[0] * c[1] / 3.0 + c[1])
    pts = ChartDomain.box(2, 0.8).sample(10, 1)
    x, y = pts[:, 0], pts[:, 1]
    u = x * x * y / 3 + y
    expected = -2 * np.exp(-2 * u) * (2 * y / 3)
    np.testing.assert_allclose(scalar_curvature_field(g).values(pts), expected, atol=1e-12)


def test_laplacian_sign_convention():
    pkg = flat_disk(1).pkg
    r2 = ScalarField(lambda c: c[0] * c[0] + c[1] * c[1], 2, 0)
    pts = ChartDomain.box(2, 1.0).sample(5, 0)
    np.testing.assert_allclose(laplacian(pkg.g, r2, pts), -4.0, atol=1e-12)
    # height on the unit sphere is a first eigenfunction: Delta h = 2 h
    h = ScalarField(lambda c: (1 - c[0] * c[0] - c[1] * c[1]) / (1 + c[0] * c[0] + c[1] * c[1]), 2, 0)
    np.testing.assert_allclose(laplacian(round_s2().pkg.g, h, pts), 2 * h.values(pts), atol=1e-12)


def test_lstar_of_fundamental_form_on_flat_c2():
    pkg = flat_disk(2).pkg
    val = lstar(pkg.omega, pkg.J, pkg.omega, ChartDomain.box(4, 1.0).sample(3, 0))
    np.testing.assert_allclose(val, 2.0, atol=1e-12)


def test_nijenhuis_witness_for_non_integrable_structure():
    J0 = standard_complex_structure(2)
    E = np.zeros((4, 4))
    E[0, 2] = E[3, 1] = 1.0

    def fn(c):
        A = jt.constant(np.broadcast_to(np.eye(4), c[0].shape + (4, 4)), c[0]) + jt.jeinsum("...,ab->...ab", c[0], E)
        return jt.jeinsum("...ab,...bc->...ac", jt.jeinsum("...ab,bc->...ac", A, J0), jt.inv(A))

    J = EndoField(fn, 4, 0, "J_twisted")
    pts = ChartDomain.box(4, 0.5).sample(8, 2)
    Jv = J.values(pts)
    np.testing.assert_allclose(np.einsum("bij,bjk->bik", Jv, Jv), -np.eye(4)[None].repeat(8, 0), atol=1e-12)
    assert np.abs(nijenhuis(J, pts)).max() >= 1e-2
    assert np.abs(nijenhuis(EndoField.constant(J0), pts)).max() == 0


def test_degenerate_metric_rejected():
    g = MetricField(lambda c: jt.jeinsum("...,ab->...ab", c[0] * 0.0, np.eye(2)), 2, 0)
    with pytest.raises(SingularMetricError):
        scalar_curvature_field(g).values(np.zeros((1, 2)))
