import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kaehlertwist import jets as jt
from kaehlertwist.fields import Field
from kaehlertwist.foliation import (
    CALIBRATED_KAPPA,
    Foliation,
    OrthogonalSplitting,
    build_I,
    calibrate_kappa,
    foliation_suite,
    lee_form,
    lee_form_frame,
    psi_tensor,
)
from kaehlertwist.forms import exterior_derivative
from kaehlertwist.geometry import FrameError, nijenhuis
from kaehlertwist.kaehler import flat_disk, fubini_study
from kaehlertwist.scenario import base_splitting
from kaehlertwist.weinstein import (
    BaseData,
    FiberData,
    build_local_weinstein,
    nonholomorphic_scenario,
)


def wobbly_split(model):
    """J-invariant line field on flat C^2 that is not a conformal foliation."""

    def fn(c):
        a, b = (c[0] * c[2] + c[3] * c[3]) * 0.7, c[1] * 0.4
        one, zero = c.const(1.0), c.zeros()
        v = jt.stack([one, zero, a, b], -1)
        jv = jt.stack([zero, one, -b, a], -1)
        return jt.stack([v, jv], -1)

    return OrthogonalSplitting.from_frame(model.pkg.g, Field(fn, 4, 0, "wobbly"), 2, "wobbly")


@pytest.fixture(scope="module")
def composite():
    return nonholomorphic_scenario()


@given(st.integers(0, 2**32 - 1))
def test_projector_from_random_frame(seed):
    model = fubini_study(2, 1.0, radius=0.7)
    F = np.random.default_rng(seed).normal(size=(4, 2))
    split = OrthogonalSplitting.from_frame(model.pkg.g, Field(lambda c: c.const(F), 4, 0), 2)
    pts = model.pkg.chart.sample(4, seed % 97)
    P, g = split.P_plus.values(pts), model.pkg.g.values(pts)
    np.testing.assert_allclose(P @ P, P, atol=1e-10)
    np.testing.assert_allclose(np.swapaxes(P, 1, 2) @ g, g @ P, atol=1e-10)
    np.testing.assert_allclose(np.trace(P, axis1=1, axis2=2), 2.0, atol=1e-10)


def test_degenerate_frame_rejected():
    model = flat_disk(2)
    F = np.zeros((4, 2))
    F[0, 0] = F[0, 1] = 1.0
    with pytest.raises(FrameError):
        OrthogonalSplitting.from_frame(model.pkg.g, Field(lambda c: c.const(F), 4, 0), 2).P_plus.values(np.zeros((1, 4)))


def test_real_splitting_is_not_complex():
    model = flat_disk(2)
    P = np.diag([1.0, 0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="not J-invariant"):
        OrthogonalSplitting.constant(P).verify(model.pkg, model.pkg.chart.sample(4, 0))


def test_coordinate_splitting_of_flat_space_is_trivial():
    model = flat_disk(2)
    rep = foliation_suite(model.pkg, base_splitting("COORDINATE(0)", model), model.pkg.chart.sample(8, 0))
    assert rep.residuals.passed
    assert all(rep.flags[k] for k in ("conformal", "riemannian", "holomorphic", "totally_geodesic", "integrable_I"))
    assert rep.psi_max == 0.0


def test_lee_form_two_routes(s2_flat):
    pts = s2_flat.sample(10, 4)
    a = lee_form(s2_flat.pkg, s2_flat.split, pts)
    b = lee_form_frame(s2_flat.pkg, s2_flat.split, pts)
    np.testing.assert_allclose(a, b, atol=1e-10)
    np.testing.assert_allclose(a, s2_flat.theta.values(pts), atol=1e-10)


def test_I_is_an_almost_complex_structure(s2_flat):
    pts = s2_flat.sample(6, 0)
    I = build_I(s2_flat.J, s2_flat.split).values(pts)
    np.testing.assert_allclose(I @ I, -np.eye(s2_flat.dim)[None].repeat(6, 0), atol=1e-12)


def test_psi_refuses_non_conformal_splitting():
    model = flat_disk(2)
    with pytest.raises(ValueError, match="conformal"):
        psi_tensor(model.pkg, wobbly_split(model), model.pkg.chart.sample(6, 0))


def test_non_conformal_splitting_gates_identities():
    model = flat_disk(2)
    rep = foliation_suite(model.pkg, wobbly_split(model), model.pkg.chart.sample(6, 0))
    assert not rep.flags["conformal"] and not rep.flags["harmonic_morphism_ready"]
    assert rep.residuals["foliation.structure_plus"].diagnostic
    assert rep.residuals["foliation.psi_antisymmetric"].diagnostic


def test_kappa_calibration_on_composite(composite):
    cal = calibrate_kappa(composite.pkg, composite.split, composite.ws.sample(8, 0))
    assert cal.stable
    assert cal.kappa == pytest.approx(CALIBRATED_KAPPA, abs=1e-9)


def test_twistor_base_flags(composite):
    f = composite.base_report.flags
    assert f["totally_geodesic"] and f["riemannian"] and not f["holomorphic"]


def test_integrability_criterion_both_directions(s2_flat, composite):
    """N_I vanishes exactly when Psi and eta on D+ both vanish."""
    model = flat_disk(2)
    cases = [(s2_flat.pkg, s2_flat.split, s2_flat.sample(8, 0)),
             (composite.pkg, composite.split, composite.ws.sample(8, 0)),
             (model.pkg, wobbly_split(model), model.pkg.chart.sample(8, 0))]
    seen = set()
    for pkg, split, pts in cases:
        fol = Foliation(pkg, split)
        n_small = np.abs(nijenhuis(fol.I, pts)).max() <= 1e-8
        tg = np.abs(fol.eta_on_plus.values(pts)).max() <= 1e-8
        if fol.conformality.values(pts).max() <= 1e-8:
            psi_small = np.abs(fol.psi.values(pts)).max() <= 1e-8
            assert n_small == (psi_small and tg)
        else:
            assert not n_small
        seen.add(n_small)
    assert seen == {True, False}


def test_homothetic_when_leaf_space_has_complex_dimension_two():
    ws = build_local_weinstein(BaseData.of(flat_disk(2)), FiberData.of(flat_disk(1)))
    pts = ws.sample(8, 0)
    assert ws.m == 2
    assert np.abs(Foliation(ws.pkg, ws.split).structure_minus().values(pts)).max() <= 1e-9
    assert np.abs(exterior_derivative(Foliation(ws.pkg, ws.split).theta).values(pts)).max() <= 1e-8
