import numpy as np
import pytest

from kaehlertwist.fields import ScalarField
from kaehlertwist.foliation import Foliation, OrthogonalSplitting
from kaehlertwist.forms import exterior_derivative, lie_derivative
from kaehlertwist.kaehler import flat_disk, round_s2
from kaehlertwist.scenario import base_splitting
from kaehlertwist.weinstein import (
    BaseData,
    FiberData,
    PositivityError,
    build_local_weinstein,
    d_omega,
    enlarged_splitting,
    invariant_form_panel,
    iota_local,
    tau,
    twist_suite,
    verify_weinstein,
)

INSTANCES = ["flat_flat", "s2_flat", "flat_c2", "product"]


@pytest.mark.parametrize("name", INSTANCES)
def test_weinstein_instance_passes_full_suite(name, request):
    ws = request.getfixturevalue(name)
    rep, frep = verify_weinstein(ws, ws.sample(24, 1))
    assert rep.passed, [r.check_id for r in rep.failures()]
    assert all(frep.flags[k] for k in ("conformal", "homothetic", "holomorphic", "totally_geodesic", "integrable_I"))


def test_product_is_riemannian_with_zero_residuals(product):
    pts = product.sample(16, 0)
    rep, frep = verify_weinstein(product, pts)
    assert frep.flags["riemannian"]
    assert max(r.statistic for r in rep.records if r.comparator == "<=") <= 1e-14


def test_non_product_is_not_riemannian(s2_flat):
    _, frep = verify_weinstein(s2_flat, s2_flat.sample(8, 0))
    assert not frep.flags["riemannian"]


def test_sampling_is_deterministic(s2_flat):
    np.testing.assert_array_equal(s2_flat.sample(12, 77), s2_flat.sample(12, 77))
    assert not np.array_equal(s2_flat.sample(12, 77), s2_flat.sample(12, 78))


def test_negative_momentum_rejected():
    with pytest.raises(PositivityError):
        build_local_weinstein(BaseData.of(flat_disk(1)), FiberData.of(flat_disk(1, c0=-0.5)))


def test_base_without_primitive_rejected():
    model = round_s2()
    bare = type(model)(model.name, model.pkg, model.action, model.einstein, None, model.scal, model.params)
    with pytest.raises(ValueError, match="primitive"):
        BaseData.of(bare)


@pytest.mark.parametrize("name", ["flat_flat", "s2_flat", "flat_c2", "product"])
def test_twist_identities(name, request):
    ws = request.getfixturevalue(name)
    rep = twist_suite(ws, ws.sample(12, 2))
    assert rep.passed, [(r.check_id, r.statistic) for r in rep.failures()]
    assert rep.metadata["iota_sign"] == 1


def test_opposite_iota_sign_breaks_intertwining(s2_flat):
    rep = twist_suite(s2_flat, s2_flat.sample(8, 0), sign=-1)
    assert rep["twist.intertwining"].statistic >= 1e-2
    assert rep["twist.multiplicative"].passed


def test_panel_forms_are_invariant(s2_flat):
    pts = s2_flat.sample(6, 0)
    for form in invariant_form_panel(s2_flat):
        assert np.abs(lie_derivative(s2_flat.K, form).values(pts)).max() <= 1e-10, form.name


def test_tau_checks_hamiltonian_precondition(s2_flat):
    one = ScalarField.constant(1.0, s2_flat.dim)
    pts = s2_flat.sample(4, 0)
    with pytest.raises(ValueError, match="K _\\| alpha"):
        tau(s2_flat.lifted["omega_N"], s2_flat.z * -1.0, s2_flat.lifted["omega_M"], one, s2_flat.K, pts)
    tau(s2_flat.lifted["omega_N"], s2_flat.z, s2_flat.lifted["omega_M"], one, s2_flat.K, pts)


def test_vanishing_z_omega_raises(flat_flat):
    zero = ScalarField.constant(0.0, flat_flat.dim)
    form = d_omega(flat_flat.lifted["omega_N"], flat_flat.lifted["omega_M"], zero, flat_flat.K)
    with pytest.raises(ZeroDivisionError):
        form.values(flat_flat.sample(2, 0))


def test_iota_is_identity_on_functions_and_top_forms(flat_flat):
    f = flat_flat.z
    assert iota_local(f, flat_flat.lifted["alpha_M"], flat_flat.K, f) is f


def test_enlarged_splitting_on_flat_product_base():
    ws = build_local_weinstein(BaseData.of(flat_disk(2, radius=0.8)), FiberData.of(flat_disk(1)))
    bsplit = base_splitting("COORDINATE(1)", ws.base.model)
    pts = ws.sample(12, 0)
    enl = enlarged_splitting(ws, bsplit, pts)
    fol = Foliation(ws.pkg, enl)
    assert enl.dim_plus == 4
    assert np.abs(fol.conformality.values(pts)).max() <= 1e-8
    # theta_M = 0 for a coordinate line of flat space
    np.testing.assert_allclose(fol.theta.values(pts), ws.theta.values(pts), atol=1e-8)
    assert np.abs(exterior_derivative(fol.theta).values(pts)).max() <= 1e-9


def test_enlarged_splitting_with_identity_projector():
    ws = build_local_weinstein(BaseData.of(flat_disk(2, radius=0.8)), FiberData.of(flat_disk(1)))
    everything = OrthogonalSplitting.constant(np.eye(4), "all")
    pts = ws.sample(4, 0)
    enl = enlarged_splitting(ws, everything, pts)
    np.testing.assert_allclose(enl.P_plus.values(pts), np.eye(6)[None].repeat(4, 0), atol=1e-12)
    with pytest.raises(ValueError, match="D-"):
        Foliation(ws.pkg, enl).theta.values(pts)


def test_enlarged_splitting_needs_complex_base_split():
    ws = build_local_weinstein(BaseData.of(flat_disk(2, radius=0.8)), FiberData.of(flat_disk(1)))
    real = OrthogonalSplitting.constant(np.diag([1.0, 0.0, 1.0, 0.0]), "real")
    with pytest.raises(ValueError):
        enlarged_splitting(ws, real, ws.sample(4, 0))
