"""Local Weinstein Kähler structures on product charts and the twist operators.

Coordinates on the product chart are ``(base, fiber)``: the base occupies the
first ``2m`` slots, the fiber the last ``2n``.  Conventions fixed here:

* ``omega~ = z omega_M + omega_N + dz ^ alpha_M`` with ``d alpha_M = omega_M``;
* ``J~ = J_M + J_N + (alpha_M o J_M) (x) K_N - alpha_M (x) J_N K_N``;
* ``g~(X, Y) = omega~(X, J~ Y)``;
* the twist uses ``K_S = -K_N``, ``Omega = omega_M`` and ``z_Omega = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import jets as jt
from .checks import CheckReport, pointwise_max, record
from .fields import (
    ChartDomain,
    Coords,
    EndoField,
    Field,
    KForm,
    ScalarField,
    VectorField,
)
from .foliation import (
    Foliation,
    FoliationReport,
    OrthogonalSplitting,
    foliation_suite,
    recovered_killing_field,
)
from .forms import exterior_derivative, full, interior_product, lift, wedge
from .geometry import j_on_one_form, metric_from_form
from .jets import Jet, jeinsum
from .kaehler import (
    HamiltonianActionData,
    HermitianPackage,
    ModelInstance,
    flat_disk,
    fubini_study,
    hermitian_package,
    verify_kaehler,
    verify_killing_holomorphic,
    verify_momentum,
)

__all__ = [
    "BaseData",
    "FiberData",
    "NonholomorphicScenario",
    "PositivityError",
    "WeinsteinStructure",
    "build_local_weinstein",
    "calibrate_iota_sign",
    "d_omega",
    "enlarged_splitting",
    "horizontal_lift_frame",
    "invariant_form_panel",
    "iota_local",
    "multi_ruled_tg_residual",
    "nonholomorphic_scenario",
    "tau",
    "twist_suite",
    "twistor_splitting",
    "verify_weinstein",
]


class PositivityError(ValueError):
    """The assembled metric is not positive definite on the sampled domain."""


@dataclass(frozen=True)
class BaseData:
    model: ModelInstance
    alpha: KForm

    @classmethod
    def of(cls, model: ModelInstance, alpha: KForm | None = None) -> BaseData:
        a = alpha if alpha is not None else model.alpha
        if a is None:
            raise ValueError(f"base {model.name} has no primitive of its Kähler form")
        return cls(model, a)

    @property
    def dim(self) -> int:
        return self.model.pkg.dim

    def verify(self, points, tol: float = 1e-10) -> CheckReport:
        pts = np.atleast_2d(points)
        res = exterior_derivative(self.alpha) - self.model.pkg.omega
        return verify_kaehler(self.model.pkg, pts, 1e-9, "base.kaehler").add(
            record("base.primitive", "d alpha_M = omega_M", res.values(pts), tol, pts))


@dataclass(frozen=True)
class FiberData:
    model: ModelInstance
    action: HamiltonianActionData

    @classmethod
    def of(cls, model: ModelInstance) -> FiberData:
        if model.action is None:
            raise ValueError(f"fiber {model.name} carries no Hamiltonian action")
        return cls(model, model.action)

    @property
    def dim(self) -> int:
        return self.model.pkg.dim

    def verify(self, points, tol: float = 1e-9) -> CheckReport:
        pts = np.atleast_2d(points)
        rep = verify_kaehler(self.model.pkg, pts, tol, "fiber.kaehler")
        rep.extend(verify_momentum(self.action, self.model.pkg, pts, 1e-10, "fiber.momentum"))
        return rep.extend(verify_killing_holomorphic(self.action.K, self.model.pkg, pts, tol, "fiber.killing"))


@dataclass
class WeinsteinStructure:
    base: BaseData
    fiber: FiberData
    chart: ChartDomain
    omega: KForm
    J: EndoField
    g: Field
    z: ScalarField
    theta: KForm
    split: OrthogonalSplitting
    pkg: HermitianPackage
    K: VectorField  # fiber action pushed into the product
    lifted: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.base.dim // 2

    @property
    def n(self) -> int:
        return self.fiber.dim // 2

    @property
    def dim(self) -> int:
        return self.chart.dim

    def sample(self, n: int, seed: int) -> np.ndarray:
        return self.chart.sample(n, seed)

    def base_part(self, points) -> np.ndarray:
        return np.atleast_2d(points)[:, : self.base.dim]

    def fiber_part(self, points) -> np.ndarray:
        return np.atleast_2d(points)[:, self.base.dim:]


def build_local_weinstein(base: BaseData, fiber: FiberData, check_points=None) -> WeinsteinStructure:
    dm, dn = base.dim, fiber.dim
    d = dm + dn
    chart = base.model.pkg.chart.product(fiber.model.pkg.chart)
    bp, fp = base.model.pkg, fiber.model.pkg
    act = fiber.action

    omega_M = lift(bp.omega, d, 0)
    alpha_M = lift(base.alpha, d, 0)
    alpha_JM = lift(j_on_one_form(bp.J, base.alpha), d, 0)
    omega_N = lift(fp.omega, d, dm)
    z = lift(act.z, d, dm)
    dz = lift(interior_product(act.K, fp.omega), d, dm)
    K = lift(act.K, d, dm)
    JM, JN = lift(bp.J, d, 0), lift(fp.J, d, dm)
    JN_K = VectorField.build(lambda c: jeinsum("...ab,...b->...a", JN(c), K(c)), d, (JN, K), name="J_N K")

    omega = omega_M * z + omega_N + wedge(dz, alpha_M)
    omega.name = "omega~"

    def jfn(c: Coords) -> Jet:
        out = JM(c) + JN(c)
        out = out + jeinsum("...a,...b->...ab", K(c), alpha_JM(c))
        return out - jeinsum("...a,...b->...ab", JN_K(c), alpha_M(c))

    J = EndoField.build(jfn, d, (JM, JN, K, alpha_JM, JN_K, alpha_M), name="J~", complex_structure=True)
    g = metric_from_form(omega, J)
    pkg = hermitian_package(chart, g, J, omega)
    theta = exterior_derivative(z.map(jt.log, "ln z"))

    fiber_cols = np.zeros((d, dn))
    fiber_cols[dm:, :] = np.eye(dn)
    frame = Field(lambda c: c.const(fiber_cols), d, 0, "fiber frame")
    split = OrthogonalSplitting.from_frame(g, frame, dn, "canonical")

    ws = WeinsteinStructure(base, fiber, chart, omega, J, g, z, theta, split, pkg, K,
                            {"omega_M": omega_M, "alpha_M": alpha_M, "omega_N": omega_N, "dz": dz,
                             "J_M": JM, "J_N": JN, "g_M": lift(bp.g, d, 0), "g_N": lift(fp.g, d, dm)})
    pts = chart.sample(64, 0) if check_points is None else np.atleast_2d(check_points)
    _check_positive(ws, pts)
    return ws


def _check_positive(ws: WeinsteinStructure, pts: np.ndarray) -> None:
    gv = ws.g.values(pts)
    sym = 0.5 * (gv + np.swapaxes(gv, 1, 2))
    ev = np.linalg.eigvalsh(sym).min(axis=1)
    if np.any(ev <= 0):
        k = int(np.argmin(ev))
        raise PositivityError(f"metric not positive at {pts[k].tolist()} (min eigenvalue {ev[k]:.3e}); shrink the domain")


def horizontal_lift_frame(ws: WeinsteinStructure, base_frame: Field) -> Field:
    """Columns ``X + alpha_M(X) K_N`` for the columns ``X`` of a base frame ``(B, 2m, r)``."""
    d, dm = ws.dim, ws.base.dim
    alpha, K = ws.base.alpha, ws.K

    def fn(c: Coords) -> Jet:
        cb = c.sub(0, dm)
        E = base_frame(cb)
        a = jeinsum("...a,...ar->...r", alpha(cb), E)
        bottom = jeinsum("...a,...r->...ar", K(c)[:, dm:], a)
        return jt.concatenate([E, bottom], axis=1)

    return Field(fn, d, max(base_frame.loss, alpha.loss, K.loss), "horizontal lift")


def _distribution_checks(ws: WeinsteinStructure, pts: np.ndarray, tol: float) -> CheckReport:
    dm = ws.base.dim
    eye = np.eye(dm)
    F = horizontal_lift_frame(ws, Field(lambda c: c.const(eye), dm, 0)).values(pts)
    g, W, J = ws.g.values(pts), full(ws.omega, pts), ws.J.values(pts)
    P = ws.split.P_plus.values(pts)
    V = np.zeros((ws.dim, ws.fiber.dim))
    V[dm:] = np.eye(ws.fiber.dim)
    JF = np.einsum("bac,bcr->bar", J, F)
    # the frame has identity base block, so J~ F in span(F) iff J~ F = F (J~ F)_base
    pred = np.einsum("bar,brs->bas", F, JF[:, :dm, :])
    gM = ws.lifted["g_M"].values(pts)[:, :dm, :dm]
    zv = ws.z.values(pts)
    gN = ws.lifted["g_N"].values(pts)[:, dm:, dm:]
    return CheckReport().add(
        record("weinstein.D_minus_g_orthogonal", "g~(D+, X + alpha(X) K) = 0", np.einsum("ar,bas,bsq->brq", V, g, F), tol, pts),
        record("weinstein.D_minus_omega_orthogonal", "omega~(D+, X + alpha(X) K) = 0", np.einsum("ar,bas,bsq->brq", V, W, F), tol, pts),
        record("weinstein.D_minus_projector", "P+ (X + alpha(X) K) = 0", np.einsum("bas,bsq->baq", P, F), tol, pts),
        record("weinstein.D_minus_J_invariant", "J~ D- = D-", JF - pred, tol, pts),
        record("weinstein.metric_minus", "g~ = z g_M on D-", np.einsum("bar,bas,bsq->brq", F, g, F) - zv[:, None, None] * gM, tol, pts),
        record("weinstein.metric_plus", "g~ = g_N on D+", np.einsum("ar,bas,sq->brq", V, g, V) - gN, tol, pts),
    )


def verify_weinstein(ws: WeinsteinStructure, points, tol: float = 1e-8, kaehler_tol: float = 1e-9,
                     kappa: float | None = None) -> tuple[CheckReport, FoliationReport]:
    """Kähler, distribution, TGHH, prolongation and curvature-form checks of a Weinstein instance."""
    pts = np.atleast_2d(points)
    rep = verify_kaehler(ws.pkg, pts, kaehler_tol, "weinstein.kaehler")
    rep.extend(_distribution_checks(ws, pts, kaehler_tol))
    fine = {k: kaehler_tol for k in ("theta_exact", "homothetic", "structure_plus", "structure_minus",
                                     "minimality", "prolongation.momentum")}
    expect = {"conformal": True, "homothetic": True, "holomorphic": True, "totally_geodesic": True, "integrable_I": True}
    frep = foliation_suite(ws.pkg, ws.split, pts, tol, z=ws.z, kappa=kappa, prefix="tghh", tols=fine, expect=expect)
    rep.extend(frep.residuals)
    rep.extend(verify_killing_holomorphic(ws.K, ws.pkg, pts, tol, "weinstein.killing"))
    fol = Foliation(ws.pkg, ws.split)
    Krec = recovered_killing_field(fol, ws.z)
    rep.add(record("weinstein.recovered_K", "-z J zeta = K_N lifted", (Krec.values(pts) - ws.K.values(pts)), tol, pts))
    curv = exterior_derivative(fol.omega_plus) + wedge(ws.lifted["omega_M"], exterior_derivative(ws.z))
    rep.add(record("weinstein.curvature_form", "d omega_+ = -omega_M ^ dz", curv.values(pts), kaehler_tol, pts))
    return rep, frep


# -- twist operators --------------------------------------------------------

def _reciprocal(z: ScalarField, eps: float = 1e-14) -> ScalarField:
    def fn(c: Coords) -> Jet:
        v = z(c)
        bad = np.abs(v.value) < eps
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ZeroDivisionError(f"z_Omega vanishes at {c.x.value[k].tolist()}")
        return 1.0 / v

    return ScalarField.build(fn, z.dim, (z,), name="1/z")


def d_omega(alpha: KForm | ScalarField, Omega: KForm, z_Omega: ScalarField, K: VectorField) -> KForm:
    """``d_Omega alpha = d alpha + z_Omega^{-1} Omega ^ (K _| alpha)``."""
    if isinstance(alpha, ScalarField) or alpha.degree == 0:
        return exterior_derivative(alpha)
    if alpha.degree >= alpha.dim:
        raise ValueError("d_Omega of a top-degree form")
    return exterior_derivative(alpha) + wedge(Omega, interior_product(K, alpha)) * _reciprocal(z_Omega)


def tau(alpha: KForm, z_alpha: ScalarField, Omega: KForm, z_Omega: ScalarField, K: VectorField | None = None,
        points=None, tol: float = 1e-9) -> KForm:
    """``tau_Omega(alpha) = alpha - (z_alpha / z_Omega) Omega``; checks ``K _| alpha = d z_alpha`` when given K and points."""
    if K is not None and points is not None:
        pts = np.atleast_2d(points)
        res = pointwise_max((interior_product(K, alpha) - exterior_derivative(z_alpha)).values(pts))
        if np.max(res) > tol:
            k = int(np.argmax(res))
            raise ValueError(f"tau: K _| alpha != d z_alpha (residual {res[k]:.3e} at {pts[k].tolist()})")
    return alpha - Omega * (z_alpha * _reciprocal(z_Omega))


def iota_local(alpha: KForm | ScalarField, alpha_M: KForm, K: VectorField, z_Omega: ScalarField, sign: int = 1) -> KForm | ScalarField:
    """``alpha + s z_Omega^{-1} alpha_M ^ (K _| alpha)``."""
    if isinstance(alpha, ScalarField) or alpha.degree == 0:
        return alpha
    if alpha.degree >= alpha.dim:
        return alpha
    return alpha + wedge(alpha_M, interior_product(K, alpha)) * (_reciprocal(z_Omega) * float(sign))


def calibrate_iota_sign(panel: list[KForm], alpha_M: KForm, Omega: KForm, K: VectorField, z_Omega: ScalarField,
                        points, tol: float = 1e-9) -> int:
    """The unique sign for which ``d o iota = iota o d_Omega`` on the panel."""
    pts = np.atleast_2d(points)
    ok = []
    for s in (1, -1):
        worst = 0.0
        for a in panel:
            if a.degree + 1 >= a.dim:
                continue
            lhs = exterior_derivative(iota_local(a, alpha_M, K, z_Omega, s))
            rhs = iota_local(d_omega(a, Omega, z_Omega, K), alpha_M, K, z_Omega, s)
            worst = max(worst, float(np.max(np.abs((lhs - rhs).values(pts)))))
        if worst <= tol:
            ok.append(s)
    if len(ok) != 1:
        raise ArithmeticError(f"iota sign calibration inconclusive: passing signs {ok}")
    return ok[0]


def invariant_form_panel(ws: WeinsteinStructure, seed: int = 0) -> list[KForm]:
    """Randomised forms invariant under the fiber action, with non-trivial contractions."""
    rng = np.random.default_rng(seed)
    d, dm = ws.dim, ws.base.dim
    z = ws.z
    gN = ws.lifted["g_N"]
    K = ws.K
    xi = KForm.build(lambda c: jeinsum("...ab,...b->...a", gN(c), K(c)), d, 1, (gN, K), name="K_flat")
    coef = rng.normal(size=(dm, dm + 1))

    def base_one_form(i):
        def fn(c: Coords):
            comps = []
            for a in range(d):
                if a < dm:
                    comps.append(sum(coef[a, j] * c[j] for j in range(dm)) * c[(i + a) % dm] + coef[a, dm])
                else:
                    comps.append(c.zeros())
            return jt.stack(comps, -1)
        return KForm(fn, d, 1, 0, f"beta{i}")

    b0, b1 = base_one_form(0), base_one_form(1)
    f = z.map(lambda v: jt.exp(0.3 * v), "exp z")
    panel = [
        ws.lifted["omega_N"],
        ws.lifted["omega_M"] * z,
        xi,
        xi * f,
        b0 * f,
        wedge(xi, b0),
        wedge(ws.lifted["omega_N"], b1) if d >= 5 else wedge(xi, b1),
        wedge(ws.lifted["dz"], b0),
    ]
    return panel


def _negated(K: VectorField) -> VectorField:
    return VectorField.build(lambda c: -K(c), K.dim, (K,), name="K_S")


def twist_suite(ws: WeinsteinStructure, points, tol: float = 1e-10, tol_intertwine: float = 1e-9,
                seed: int = 0, sign: int | None = None) -> CheckReport:
    """Twist identities on a panel of action-invariant forms.

    ``d_Omega`` squares to zero and kills ``tau``-images, ``iota`` intertwines
    ``d_Omega`` with ``d`` and is multiplicative, and ``iota(tau(omega_N))``
    recovers ``omega~``.  The sign of ``iota`` is calibrated unless given.
    """
    pts = np.atleast_2d(points)
    d = ws.dim
    Omega, alpha_M = ws.lifted["omega_M"], ws.lifted["alpha_M"]
    K_S = _negated(ws.K)
    one = ScalarField.constant(1.0, d)
    panel = invariant_form_panel(ws, seed)
    degenerate = not np.any(ws.K.values(pts))
    if sign is None:
        # with K = 0 both signs act as the identity
        sign = 1 if degenerate else calibrate_iota_sign(panel, alpha_M, Omega, K_S, one, pts, tol_intertwine)
    s = sign

    def worst(forms):
        res = [pointwise_max(f.values(pts)) for f in forms]
        return np.max(res, axis=0) if res else np.zeros(len(pts))

    square = [d_omega(d_omega(a, Omega, one, K_S), Omega, one, K_S) for a in panel if a.degree + 2 < d]
    inter = [exterior_derivative(iota_local(a, alpha_M, K_S, one, s))
             - iota_local(d_omega(a, Omega, one, K_S), alpha_M, K_S, one, s) for a in panel if a.degree + 1 < d]
    mult = []
    for i, a in enumerate(panel):
        for b in panel[i + 1:]:
            if a.degree + b.degree <= d:
                mult.append(iota_local(wedge(a, b), alpha_M, K_S, one, s)
                            - wedge(iota_local(a, alpha_M, K_S, one, s), iota_local(b, alpha_M, K_S, one, s)))
    # K_S _| omega_N = -dz, so the Hamiltonian of omega_N for K_S is -z
    zS = ws.z * -1.0
    tau_N = tau(ws.lifted["omega_N"], zS, Omega, one, K_S, pts, tol_intertwine)
    taus = [tau_N, tau(ws.omega, zS, Omega, one, K_S, pts, tol_intertwine)]
    rec = CheckReport(metadata={"iota_sign": s, "iota_sign_degenerate": degenerate})
    return rec.add(
        record("twist.d_omega_squared", "d_Omega^2 = 0 on invariant forms", worst(square), tol, pts),
        record("twist.d_omega_tau", "d_Omega tau_Omega = 0 on closed forms", worst([d_omega(t, Omega, one, K_S) for t in taus]), tol, pts),
        record("twist.intertwining", "d iota = iota d_Omega", worst(inter), tol_intertwine, pts),
        record("twist.multiplicative", "iota(a ^ b) = iota(a) ^ iota(b)", worst(mult), tol, pts),
        record("twist.recovers_omega", "iota(tau(omega_N)) = omega~",
               (iota_local(tau_N, alpha_M, K_S, one, s) - ws.omega).values(pts), tol_intertwine, pts),
    )


# -- enlarged and composite splittings --------------------------------------

def enlarged_splitting(ws: WeinsteinStructure, base_split: OrthogonalSplitting, points=None, tol: float = 1e-9) -> OrthogonalSplitting:
    """Fiber directions plus the horizontal lift of the base distribution ``D+^M``."""
    if base_split.dim != ws.base.dim:
        raise ValueError("base splitting lives on a chart of the wrong dimension")
    if base_split.frame is None:
        raise ValueError("base splitting needs a spanning frame")
    pts = ws.base.model.pkg.chart.sample(16, 0) if points is None else ws.base_part(points)
    base_split.verify(ws.base.model.pkg, pts, tol)  # raises unless J_M-invariant
    d, dm, dn = ws.dim, ws.base.dim, ws.fiber.dim
    hl = horizontal_lift_frame(ws, base_split.frame)
    fiber_cols = np.zeros((d, dn))
    fiber_cols[dm:] = np.eye(dn)

    def fn(c: Coords) -> Jet:
        return jt.concatenate([c.const(fiber_cols), hl(c)], axis=-1)

    frame = Field(fn, d, hl.loss, "enlarged frame")
    return OrthogonalSplitting.from_frame(ws.g, frame, dn + base_split.dim_plus, f"enlarged[{base_split.name}]")


def multi_ruled_tg_residual(ws: WeinsteinStructure, enlarged: OrthogonalSplitting, base_split: OrthogonalSplitting,
                            points) -> np.ndarray:
    """``eta_{D+}`` applied to horizontal lifts of ``D-^M``."""
    pts = np.atleast_2d(points)
    fol = Foliation(ws.pkg, enlarged)
    E = fol.eta.values(pts)
    P = enlarged.P_plus.values(pts)
    dm = ws.base.dim
    QM = base_split.P_minus
    lifted = horizontal_lift_frame(ws, Field(lambda c: QM(c), dm, QM.loss)).values(pts)
    return np.einsum("bkv,bkac,bcx->bvax", P, E, lifted)


def twistor_splitting(model: ModelInstance) -> OrthogonalSplitting:
    """Fibers of ``CP^3 -> HP^1`` through the affine chart ``[1 : w1 : w2 : w3]``.

    The line through ``Z`` and ``sigma Z`` with ``sigma(z0, z1, z2, z3) = (-z1*, z0*, -z3*, z2*)``
    has tangent ``v = (1 + |w1|^2, w1* w2 - w3*, w1* w3 + w2*)`` at ``Z``; D+ = span(v, J v).
    """
    if model.pkg.dim != 6:
        raise ValueError("the twistor splitting lives on CP^3")

    def fn(c: Coords) -> Jet:
        x1, y1, x2, y2, x3, y3 = (c[i] for i in range(6))
        re = [1.0 + x1 * x1 + y1 * y1, x1 * x2 + y1 * y2 - x3, x1 * x3 + y1 * y3 + x2]
        im = [c.zeros(), x1 * y2 - y1 * x2 + y3, x1 * y3 - y1 * x3 - y2]
        v = jt.stack([re[0], im[0], re[1], im[1], re[2], im[2]], -1)
        jv = jt.stack([-im[0], re[0], -im[1], re[1], -im[2], re[2]], -1)
        return jt.stack([v, jv], -1)

    frame = Field(fn, 6, 0, "twistor frame")
    return OrthogonalSplitting.from_frame(model.pkg.g, frame, 2, "twistor")


@dataclass
class NonholomorphicScenario:
    ws: WeinsteinStructure
    base_split: OrthogonalSplitting
    split: OrthogonalSplitting
    base_report: FoliationReport

    @property
    def pkg(self) -> HermitianPackage:
        return self.ws.pkg


@lru_cache(maxsize=4)
def nonholomorphic_scenario(c0: float = 1.0, fiber_radius: float = 0.5, base_radius: float = 0.5,
                            base_scale: float = 1.0, check_samples: int = 8) -> NonholomorphicScenario:
    """Flat-disk fiber over CP^3 with the twistor splitting; returns the composite splitting."""
    base_model = fubini_study(3, base_scale, c0=1.0, radius=base_radius)
    base_split = twistor_splitting(base_model)
    pts = base_model.pkg.chart.sample(check_samples, 1)
    brep = foliation_suite(base_model.pkg, base_split, pts, 1e-8, prefix="twistor",
                           expect={"totally_geodesic": True, "riemannian": True, "holomorphic": False})
    f = brep.flags
    if not (f["totally_geodesic"] and f["riemannian"]) or f["holomorphic"]:
        bad = [r.check_id for r in brep.residuals.failures()]
        raise ValueError(f"base twistor splitting fails its own checks: flags {f}, failures {bad}")
    fiber = FiberData.of(flat_disk(1, c0=c0, radius=fiber_radius))
    ws = build_local_weinstein(BaseData.of(base_model), fiber)
    split = enlarged_splitting(ws, base_split, ws.sample(check_samples, 2))
    return NonholomorphicScenario(ws, base_split, split, brep)
