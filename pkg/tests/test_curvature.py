import numpy as np
import pytest

from kaehlertwist.curvature import (
    LAPLACIAN_CONVENTION,
    csck_scenario,
    curvature_suite,
    einstein_momentum_identity,
    ricci_form_residual,
    scalar_formula_residual,
)
from kaehlertwist.geometry import scalar_curvature_field
from kaehlertwist.kaehler import (
    const_curv_surface,
    flat_disk,
    hyperbolic_ball,
    round_s2,
)
from kaehlertwist.weinstein import BaseData, FiberData, build_local_weinstein


@pytest.fixture(scope="module")
def csck():
    return csck_scenario(round_s2(c0=3.0), samples=64)


@pytest.mark.parametrize("name", ["flat_flat", "s2_flat", "flat_c2", "product"])
def test_curvature_formulas_on_instances(name, request):
    ws = request.getfixturevalue(name)
    rep = curvature_suite(ws, ws.sample(12, 3))
    assert rep.passed, [(r.check_id, r.statistic) for r in rep.failures()]


def test_curvature_formulas_with_curved_fiber_and_base():
    ws = build_local_weinstein(BaseData.of(hyperbolic_ball(1)), FiberData.of(round_s2(c0=3.0)))
    assert curvature_suite(ws, ws.sample(12, 0)).passed


def test_opposite_twist_sign_breaks_ricci_prediction(s2_flat):
    pts = s2_flat.sample(6, 0)
    assert ricci_form_residual(s2_flat, pts, sign=1).max() <= 1e-10
    assert ricci_form_residual(s2_flat, pts, sign=-1).max() >= 1e-2


def test_momentum_constant_of_round_sphere():
    # z = 3 - 2/(1+r^2) = 2 - h for the height h, and Delta h = 2h, so Delta z / 2 = z - 2
    fiber = FiberData.of(round_s2(c0=3.0))
    em = einstein_momentum_identity(fiber, fiber.model.pkg.chart.sample(40, 0))
    assert em.c == pytest.approx(2.0, abs=1e-12)
    assert em.deviation <= 1e-8 and em.contraction.max() <= 1e-8


def test_momentum_identity_needs_einstein_flag():
    m = flat_disk(1)
    bare = type(m)(m.name, m.pkg, m.action, None, m.alpha, m.scal, m.params)
    with pytest.raises(ValueError, match="Einstein"):
        einstein_momentum_identity(FiberData.of(bare), m.pkg.chart.sample(3, 0))


def test_csck_scalar_curvature_is_six(csck):
    assert csck.report.passed
    assert csck.c == pytest.approx(2.0)
    assert csck.expected_scal == 6.0
    np.testing.assert_allclose(csck.scal, 6.0, atol=1e-5)
    assert csck.report["csck.non_einstein"].statistic >= 1e-3


def test_csck_negative_control_spreads():
    ctrl = csck_scenario(round_s2(c0=3.0), base_scal_override=9.0, samples=64)
    rec = ctrl.report["csck.negative_control"]
    assert rec.passed and rec.statistic >= 1e-3


def test_csck_rejects_flat_fiber():
    with pytest.raises(ValueError, match="Lambda > 0"):
        csck_scenario(flat_disk(1))


def test_scalar_formula_independent_of_base_choice(s2_flat):
    pts = s2_flat.sample(8, 1)
    assert scalar_formula_residual(s2_flat, pts).max() <= 1e-10
    ws = build_local_weinstein(BaseData.of(const_curv_surface(-3.0)), FiberData.of(flat_disk(1)))
    assert scalar_formula_residual(ws, ws.sample(8, 1)).max() <= 1e-10


def test_flat_flat_scalar_curvature_closed_form(flat_flat):
    # flat fiber: scal = 2m Delta z / z + m(1-m) |K|^2 / z^2 with m = 1, Delta z = -2
    pts = flat_flat.sample(10, 0)
    z = flat_flat.z.values(pts)
    np.testing.assert_allclose(scalar_curvature_field(flat_flat.g).values(pts), -4.0 / z, atol=1e-10)


def test_laplacian_convention_is_documented():
    assert "d*d" in LAPLACIAN_CONVENTION
