"""Ricci form and scalar curvature of Weinstein structures; the cscK construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets as jt
from .checks import CheckReport, pointwise_max, record
from .fields import KForm, ScalarField
from .forms import exterior_derivative, full, interior_product, lift
from .geometry import (
    j_on_one_form,
    laplacian_field,
    ricci_field,
    ricci_form_field,
    scalar_curvature_field,
)
from .jets import jeinsum
from .kaehler import ModelInstance, closedness_residual, const_curv_surface
from .weinstein import (
    BaseData,
    FiberData,
    WeinsteinStructure,
    _negated,
    build_local_weinstein,
    iota_local,
)

__all__ = [
    "LAPLACIAN_CONVENTION",
    "CsckResult",
    "CurvatureSample",
    "EinsteinMomentum",
    "csck_scenario",
    "curvature_sample",
    "curvature_suite",
    "einstein_momentum_identity",
    "fiber_terms",
    "rho_type_residuals",
    "ricci_block_residual",
    "ricci_form_prediction",
    "ricci_form_residual",
    "scalar_formula_residual",
]

LAPLACIAN_CONVENTION = "Delta = d*d (non-negative spectrum; Delta h = 2h for the height on the unit sphere)"


@dataclass
class CurvatureSample:
    points: np.ndarray
    rho: np.ndarray
    ric_plus: np.ndarray
    ric_minus: np.ndarray
    scal: np.ndarray


@dataclass(frozen=True)
class _FiberTerms:
    laplacian_z: ScalarField
    norm_K: ScalarField
    scal: ScalarField
    rho: KForm


def fiber_terms(fiber: FiberData) -> _FiberTerms:
    pkg, act = fiber.model.pkg, fiber.action
    g, K = pkg.g, act.K
    xN = ScalarField.build(lambda c: jeinsum("...a,...a->...", K(c), jeinsum("...ab,...b->...a", g(c), K(c))),
                           pkg.dim, (g, K), name="x_N")
    return _FiberTerms(laplacian_field(g, act.z), xN, scalar_curvature_field(g), ricci_form_field(g, pkg.J))


def ricci_form_prediction(ws: WeinsteinStructure, sign: int = 1) -> KForm:
    """``iota[rho_N + (m/2) d J_N d ln z + rho_M + 1/2 (Delta_N z - m x_N / z) omega_M]``."""
    d, dm, m = ws.dim, ws.base.dim, ws.m
    fib = ws.fiber
    ft = fiber_terms(fib)
    zN = fib.action.z
    pkgN, pkgM = fib.model.pkg, ws.base.model.pkg
    twist = exterior_derivative(j_on_one_form(pkgN.J, exterior_derivative(zN.map(jt.log))))
    fiber_part = lift(ft.rho + twist * (0.5 * m), d, dm)
    coeff = lift((ft.laplacian_z - ft.norm_K * float(m) / zN) * 0.5, d, dm)
    rhs = fiber_part + lift(ricci_form_field(pkgM.g, pkgM.J), d, 0) + ws.lifted["omega_M"] * coeff
    K_S = _negated(ws.K)
    return iota_local(rhs, ws.lifted["alpha_M"], K_S, ScalarField.constant(1.0, d), sign)


def ricci_form_residual(ws: WeinsteinStructure, points, sign: int = 1) -> np.ndarray:
    lhs = ricci_form_field(ws.g, ws.J)
    return pointwise_max((lhs - ricci_form_prediction(ws, sign)).values(points))


def ricci_block_residual(ws: WeinsteinStructure, points) -> np.ndarray:
    pts = np.atleast_2d(points)
    ric = ricci_field(ws.g).values(pts)
    P, Q = ws.split.P_plus.values(pts), ws.split.P_minus.values(pts)
    return pointwise_max(np.einsum("Bai,Bab,Bbj->Bij", P, ric, Q))


def scalar_formula_prediction(ws: WeinsteinStructure) -> ScalarField:
    d, dm, m = ws.dim, ws.base.dim, ws.m
    ft = fiber_terms(ws.fiber)
    zN = ws.fiber.action.z
    fib = ft.scal + ft.laplacian_z * (2.0 * m) / zN + ft.norm_K * float(m * (1 - m)) / (zN * zN)
    scalM = lift(scalar_curvature_field(ws.base.model.pkg.g), d, 0)
    return lift(fib, d, dm) + scalM / ws.z


def scalar_formula_residual(ws: WeinsteinStructure, points) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.abs(scalar_curvature_field(ws.g).values(pts) - scalar_formula_prediction(ws).values(pts))


def rho_type_residuals(ws: WeinsteinStructure, points) -> tuple[np.ndarray, np.ndarray]:
    """``d rho`` and the J-anti-invariant part of ``rho``."""
    pts = np.atleast_2d(points)
    rho = ricci_form_field(ws.g, ws.J)
    R = full(rho, pts)
    J = ws.J.values(pts)
    anti = np.einsum("Bai,Bab,Bbj->Bij", J, R, J) - R
    return pointwise_max(closedness_residual(rho, pts)), pointwise_max(anti)


def curvature_sample(ws: WeinsteinStructure, points) -> CurvatureSample:
    pts = np.atleast_2d(points)
    ric = ricci_field(ws.g).values(pts)
    P, Q = ws.split.P_plus.values(pts), ws.split.P_minus.values(pts)
    return CurvatureSample(
        pts,
        full(ricci_form_field(ws.g, ws.J), pts),
        np.einsum("Bai,Bab,Bbj->Bij", P, ric, P),
        np.einsum("Bai,Bab,Bbj->Bij", Q, ric, Q),
        scalar_curvature_field(ws.g).values(pts),
    )


def curvature_suite(ws: WeinsteinStructure, points, tol_ricci: float = 1e-5, tol_block: float = 1e-6,
                    tol_scal: float = 1e-5, tol_rho: float = 1e-6) -> CheckReport:
    pts = np.atleast_2d(points)
    closed, anti = rho_type_residuals(ws, pts)
    return CheckReport().add(
        record("curvature.ricci_form", "rho~ = iota(rho_N + m/2 dJd ln z + rho_M + (Delta z - m x/z)/2 omega_M)",
               ricci_form_residual(ws, pts), tol_ricci, pts),
        record("curvature.ricci_blocks", "Ric~ preserves D+ and D-", ricci_block_residual(ws, pts), tol_block, pts),
        record("curvature.scalar_formula", "scal~ = scal_N + 2m Delta z/z + m(1-m) x/z^2 + scal_M/z",
               scalar_formula_residual(ws, pts), tol_scal, pts),
        record("curvature.rho_closed", "d rho~ = 0", closed, tol_rho, pts),
        record("curvature.rho_type", "rho~(J.,J.) = rho~", anti, tol_rho, pts),
    )


@dataclass
class EinsteinMomentum:
    c: float
    deviation: float
    values: np.ndarray
    contraction: np.ndarray
    points: np.ndarray


def einstein_momentum_identity(fiber: FiberData, points, einstein: float | None = None) -> EinsteinMomentum:
    """``c = Lambda z - Delta z / 2`` pointwise, and ``K _| rho = d(Delta z) / 2``."""
    lam = fiber.model.einstein if einstein is None else einstein
    if lam is None:
        raise ValueError(f"fiber {fiber.model.name} is not flagged Einstein")
    pts = np.atleast_2d(points)
    ft = fiber_terms(fiber)
    z = fiber.action.z
    cvals = lam * z.values(pts) - 0.5 * ft.laplacian_z.values(pts)
    c = float(np.mean(cvals))
    contr = interior_product(fiber.action.K, ft.rho) - exterior_derivative(ft.laplacian_z) * 0.5
    return EinsteinMomentum(c, float(np.max(np.abs(cvals - c))), cvals, pointwise_max(contr.values(pts)), pts)


@dataclass
class CsckResult:
    report: CheckReport
    ws: WeinsteinStructure
    c: float
    expected_scal: float
    scal: np.ndarray
    points: np.ndarray


def csck_scenario(fiber_model: ModelInstance, base_scal_override: float | None = None, samples: int = 200,
                  seed: int = 0, tol: float = 1e-5, std_tol: float = 1e-6, identity_tol: float = 1e-8,
                  spread_floor: float = 1e-3, base_radius: float | None = None) -> CsckResult:
    """Weinstein structure over the surface of scalar curvature ``4c`` built from an Einstein fiber."""
    fiber = FiberData.of(fiber_model)
    lam = fiber_model.einstein
    if lam is None or lam <= 0:
        raise ValueError("the cscK construction needs an Einstein fiber with Lambda > 0")
    fpts = fiber_model.pkg.chart.sample(max(samples, 16), seed + 1)
    em = einstein_momentum_identity(fiber, fpts)
    if em.c <= 0:
        raise ValueError(f"momentum constant c = {em.c:.6g} must be positive")
    scal_M = 4 * em.c if base_scal_override is None else float(base_scal_override)
    base = BaseData.of(const_curv_surface(scal_M, radius=base_radius))
    ws = build_local_weinstein(base, fiber)
    pts = ws.sample(samples, seed)
    scal = scalar_curvature_field(ws.g).values(pts)
    n = fiber.dim // 2
    target = (2 * n + 4) * lam
    rep = CheckReport(metadata={"c": em.c, "target_scal": target, "base_scal": scal_M, "laplacian": LAPLACIAN_CONVENTION})
    rep.add(
        record("csck.momentum_constant", "Delta z / 2 = Lambda z - c", em.values - em.c, identity_tol, fpts),
        record("csck.momentum_contraction", "K _| rho_N = d(Delta z) / 2", em.contraction, identity_tol, fpts),
    )
    if base_scal_override is None:
        rep.add(
            record("csck.scal_constant", "scal~ = (2n + 4) Lambda", scal - target, tol, pts, values=scal),
            record("csck.scal_std", "std of scal~ over samples", scal, std_tol, pts, signed=True, reduce="std",
                   values=scal),
        )
        rho = ricci_form_field(ws.g, ws.J) - ws.omega * lam
        rep.add(record("csck.non_einstein", "rho~ - Lambda omega~ != 0", rho.values(pts), spread_floor, pts, comparator=">="))
    else:
        rep.add(record("csck.negative_control", "scal~ spread when scal_M != 4c", scal, spread_floor, pts,
                       signed=True, comparator=">=", reduce="spread", values=scal))
    return CsckResult(rep, ws, em.c, target, scal, pts)
