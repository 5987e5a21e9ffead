"""Hermitian packages, momentum data and the standard model catalogue."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from . import jets as jt
from .checks import CheckReport, record
from .fields import (
    ChartDomain,
    Coords,
    EndoField,
    KForm,
    MetricField,
    ScalarField,
    VectorField,
)
from .forms import (
    exterior_derivative,
    full_jet,
    interior_product,
    lie_derivative,
)
from .geometry import (
    covariant_derivative_endo,
    fundamental_form,
    laplacian_field,
    nijenhuis_field,
    ricci_form_field,
)
from .jets import Jet, jeinsum

__all__ = [
    "MODEL_FACTORIES",
    "HamiltonianActionData",
    "HermitianPackage",
    "ModelInstance",
    "build_model",
    "closedness_residual",
    "const_curv_surface",
    "flat_disk",
    "fubini_study",
    "hermitian_package",
    "hyperbolic_ball",
    "laplacian",
    "round_s2",
    "standard_complex_structure",
    "standard_models",
    "verify_einstein",
    "verify_kaehler",
    "verify_killing_holomorphic",
    "verify_momentum",
]


@dataclass(frozen=True)
class HermitianPackage:
    chart: ChartDomain
    g: MetricField
    J: EndoField
    omega: KForm

    @property
    def dim(self) -> int:
        return self.chart.dim


def hermitian_package(chart: ChartDomain, g: MetricField, J: EndoField, omega: KForm | None = None) -> HermitianPackage:
    if chart.dim % 2:
        raise ValueError("a complex structure needs an even-dimensional chart")
    return HermitianPackage(chart, g, J, omega if omega is not None else fundamental_form(g, J))


@dataclass(frozen=True)
class HamiltonianActionData:
    K: VectorField
    z: ScalarField
    floor: float = 1e-6


@dataclass(frozen=True)
class ModelInstance:
    name: str
    pkg: HermitianPackage
    action: HamiltonianActionData | None = None
    einstein: float | None = None
    alpha: KForm | None = None  # primitive of omega when the model is used as a base
    scal: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def complex_dim(self) -> int:
        return self.pkg.dim // 2


def standard_complex_structure(k: int) -> np.ndarray:
    """J d/dx_j = d/dy_j in interleaved coordinates (x1, y1, x2, y2, ...)."""
    J = np.zeros((2 * k, 2 * k))
    for j in range(k):
        J[2 * j + 1, 2 * j] = 1.0
        J[2 * j, 2 * j + 1] = -1.0
    return J


# -- verification ----------------------------------------------------------

def verify_kaehler(pkg: HermitianPackage, points, tol: float = 1e-9, prefix: str = "kaehler") -> CheckReport:
    g, J, omega, d = pkg.g, pkg.J, pkg.omega, pkg.dim
    eye = np.eye(d)

    def compat(c: Coords) -> Jet:
        gv, Jv = g(c), J(c)
        r1 = jeinsum("...ka,...kb->...ab", Jv, jeinsum("...kl,...lb->...kb", gv, Jv)) - gv
        r2 = jeinsum("...ac,...cb->...ab", Jv, Jv) + eye
        r3 = full_jet(omega(c), d, 2) - jeinsum("...ki,...kj->...ij", Jv, gv)
        return jt.concatenate([r1, r2, r3], axis=-1)

    comp = MetricField(compat, d, max(g.loss, J.loss, omega.loss))
    pts = np.atleast_2d(points)
    rep = CheckReport()
    rep.add(
        record(f"{prefix}.compatibility", "g(J.,J.) = g, J^2 = -1, omega = g(J.,.)", comp.values(pts), tol, pts),
        record(f"{prefix}.nijenhuis", "N_J = 0", nijenhuis_field(J).values(pts), tol, pts),
        record(f"{prefix}.d_omega", "d omega = 0", closedness_residual(omega, pts), tol, pts),
        record(f"{prefix}.nabla_J", "nabla J = 0", covariant_derivative_endo(g, J).values(pts), tol, pts),
    )
    return rep


def closedness_residual(form: KForm, points) -> np.ndarray:
    """Components of d(form); identically zero for top-degree forms."""
    pts = np.atleast_2d(points)
    if form.degree >= form.dim:
        return np.zeros((len(pts), 1))
    return exterior_derivative(form).values(pts)


def verify_momentum(act: HamiltonianActionData, pkg: HermitianPackage, points, tol: float = 1e-10,
                    prefix: str = "momentum") -> CheckReport:
    pts = np.atleast_2d(points)
    res = interior_product(act.K, pkg.omega) - exterior_derivative(act.z)
    zv = act.z.values(pts)
    return CheckReport().add(
        record(f"{prefix}.contraction", "K _| omega = dz", res.values(pts), tol, pts),
        record(f"{prefix}.positivity", "z > 0", zv, act.floor, pts, signed=True, comparator=">=", reduce="min",
               values=zv),
    )


def verify_killing_holomorphic(K: VectorField, pkg: HermitianPackage, points, tol: float = 1e-9,
                               prefix: str = "killing") -> CheckReport:
    pts = np.atleast_2d(points)
    return CheckReport().add(
        record(f"{prefix}.lie_g", "L_K g = 0", lie_derivative(K, pkg.g).values(pts), tol, pts),
        record(f"{prefix}.lie_J", "L_K J = 0", lie_derivative(K, pkg.J).values(pts), tol, pts),
    )


def verify_einstein(model: ModelInstance, points, tol: float = 1e-8) -> CheckReport:
    if model.einstein is None:
        raise ValueError(f"{model.name} carries no Einstein constant")
    pts = np.atleast_2d(points)
    rho = ricci_form_field(model.pkg.g, model.pkg.J)
    res = rho - model.pkg.omega * model.einstein
    return CheckReport().add(record("einstein.rho", "rho = Lambda omega", res.values(pts), tol, pts))


def laplacian(pkg: HermitianPackage, f: ScalarField, points) -> np.ndarray:
    return laplacian_field(pkg.g, f).values(points)


# -- closed-form models ----------------------------------------------------

def _hermitian_block_metric(A: list[list[Jet]], B: list[list[Jet]], scale: float, c: Coords) -> Jet:
    """Real metric of the Hermitian matrix scale*2*(A + iB) in interleaved coordinates."""
    k = len(A)
    rows = []
    for j in range(2 * k):
        row = []
        for l in range(2 * k):
            a, b = A[j // 2][l // 2], B[j // 2][l // 2]
            if j % 2 == l % 2:
                row.append(a)
            elif j % 2 == 0:
                row.append(b)
            else:
                row.append(-b)
        rows.append(jt.stack(row, axis=-1))
    return jt.stack(rows, axis=-2) * (2.0 * scale)


def _split(c: Coords, k: int):
    xs = [c[2 * j] for j in range(k)]
    ys = [c[2 * j + 1] for j in range(k)]
    return xs, ys


def _rotation_field(k: int, which: tuple[int, ...]) -> VectorField:
    """Sum over selected complex coordinates of y d/dx - x d/dy."""

    def fn(c: Coords) -> Jet:
        comps = []
        for j in range(k):
            if j in which:
                comps += [c[2 * j + 1], -c[2 * j]]
            else:
                comps += [c.zeros(), c.zeros()]
        return jt.stack(comps, axis=-1)

    return VectorField(fn, 2 * k, 0, "K")


def _liouville_form(k: int, denom: Callable[[Coords], Jet] | None, lam: float) -> KForm:
    """lam * sum (x_j dy_j - y_j dx_j) / denom."""
    d = 2 * k

    def fn(c: Coords) -> Jet:
        xs, ys = _split(c, k)
        comps = []
        for j in range(k):
            comps += [-ys[j], xs[j]]
        out = jt.stack(comps, axis=-1) * lam
        if denom is not None:
            out = out * (1.0 / denom(c)).expand(-1)
        return out

    return KForm(fn, d, 1, 0, "alpha")


def _xdy_form(k: int) -> KForm:
    def fn(c: Coords) -> Jet:
        xs, _ = _split(c, k)
        comps = []
        for j in range(k):
            comps += [c.zeros(), xs[j]]
        return jt.stack(comps, axis=-1)

    return KForm(fn, 2 * k, 1, 0, "alpha")


def flat_disk(k: int = 1, c0: float = 1.0, radius: float = 1.0, action: bool = True,
              alpha: str = "potential", name: str | None = None) -> ModelInstance:
    """Flat C^k with the diagonal rotation and z = |w|^2/2 + c0."""
    d = 2 * k
    chart = ChartDomain.box(d, radius)
    g = MetricField(lambda c: c.const(np.eye(d)), d, 0, "g")
    J = EndoField.constant(standard_complex_structure(k), "J", complex_structure=True)
    pkg = hermitian_package(chart, g, J)
    act = None
    if action:
        K = _rotation_field(k, tuple(range(k)))
        z = ScalarField(lambda c: sum(c[i] * c[i] for i in range(d)) * 0.5 + c0, d, 0, "z")
    else:
        K = VectorField(lambda c: c.zeros((d,)), d, 0, "K")
        z = ScalarField(lambda c: c.const(c0), d, 0, "z")
    act = HamiltonianActionData(K, z)
    prim = _xdy_form(k) if alpha == "xdy" else _liouville_form(k, None, 0.5)
    return ModelInstance(name or f"FLAT_DISK_C{k}", pkg, act, 0.0, prim, 0.0,
                         {"k": k, "c0": c0, "radius": radius, "action": action, "alpha": alpha})


def _curved(k: int, lam: float, eps: float, c0: float, radius: float, name: str) -> ModelInstance:
    d = 2 * k
    chart = ChartDomain.box(d, radius)

    def denom(c: Coords) -> Jet:
        xs, ys = _split(c, k)
        return 1.0 + eps * sum(xs[j] * xs[j] + ys[j] * ys[j] for j in range(k))

    def gfn(c: Coords) -> Jet:
        xs, ys = _split(c, k)
        D = denom(c)
        inv2 = 1.0 / (D * D)
        A = [[None] * k for _ in range(k)]
        B = [[None] * k for _ in range(k)]
        for j in range(k):
            for l in range(k):
                re = xs[j] * xs[l] + ys[j] * ys[l]
                im = xs[j] * ys[l] - ys[j] * xs[l]
                a = -eps * re
                if j == l:
                    a = a + D
                A[j][l] = a * inv2
                B[j][l] = (-eps * im) * inv2
        return _hermitian_block_metric(A, B, lam, c)

    g = MetricField(gfn, d, 0, "g")
    J = EndoField.constant(standard_complex_structure(k), "J", complex_structure=True)
    pkg = hermitian_package(chart, g, J)
    K = _rotation_field(k, (0,))

    def zfn(c: Coords) -> Jet:
        xs, ys = _split(c, k)
        r1 = xs[0] * xs[0] + ys[0] * ys[0]
        if eps > 0:
            return c0 - lam * (denom(c) - r1) / denom(c)
        return c0 + lam * r1 / denom(c)

    act = HamiltonianActionData(K, ScalarField(zfn, d, 0, "z"))
    lam_e = eps * (k + 1) / lam
    prim = _liouville_form(k, denom, lam)
    return ModelInstance(name, pkg, act, lam_e, prim, 2 * k * lam_e,
                         {"k": k, "lambda": lam, "c0": c0, "radius": radius})


def fubini_study(k: int = 1, lam: float = 2.0, c0: float = 3.0, radius: float = 1.0,
                 name: str | None = None) -> ModelInstance:
    """Fubini-Study metric lam * i dd-bar log(1+|w|^2) on an affine chart of CP^k."""
    return _curved(k, lam, 1.0, c0, radius, name or f"FUBINI_STUDY_P{k}")


def hyperbolic_ball(k: int = 1, lam: float = 2.0, c0: float = 1.0, radius: float = 0.6,
                    name: str | None = None) -> ModelInstance:
    """Bergman-type metric -lam * i dd-bar log(1-|w|^2) on the unit ball."""
    return _curved(k, lam, -1.0, c0, radius, name or ("HYPERBOLIC_DISK" if k == 1 else f"HYPERBOLIC_BALL_{k}"))


def round_s2(c0: float = 3.0, radius: float = 1.0) -> ModelInstance:
    """Unit round sphere 4(1+r^2)^-2 delta; Lambda = 1, z = c0 - 2/(1+r^2)."""
    return fubini_study(1, 2.0, c0, radius, "ROUND_S2")


def const_curv_surface(scal: float, c0: float = 1.0, radius: float | None = None) -> ModelInstance:
    """Surface of constant scalar curvature ``scal`` with primitive of its area form."""
    name = f"CONST_CURV_SURFACE({scal:g})"
    if scal > 0:
        return fubini_study(1, 4.0 / scal, c0, radius or 1.0, name)
    if scal < 0:
        return hyperbolic_ball(1, 4.0 / -scal, c0, radius or 0.6, name)
    return flat_disk(1, c0, radius or 1.0, name=name)


MODEL_FACTORIES: dict[str, Callable[..., ModelInstance]] = {
    "FLAT_DISK_C": flat_disk,
    "ROUND_S2": round_s2,
    "CONST_CURV_SURFACE": const_curv_surface,
    "HYPERBOLIC_DISK": lambda **kw: hyperbolic_ball(1, **kw),
    "FUBINI_STUDY": fubini_study,
    "HYPERBOLIC_BALL": hyperbolic_ball,
}


def build_model(name: str, **params) -> ModelInstance:
    try:
        factory = MODEL_FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(MODEL_FACTORIES)}") from None
    return factory(**params)


def standard_models() -> dict[str, ModelInstance]:
    return {
        "FLAT_DISK_C1": flat_disk(1),
        "FLAT_DISK_C2": flat_disk(2),
        "ROUND_S2": round_s2(),
        "CONST_CURV_SURFACE(8)": const_curv_surface(8.0),
        "HYPERBOLIC_DISK": hyperbolic_ball(1),
        "FUBINI_STUDY_P3": fubini_study(3, 1.0, c0=2.0, radius=0.8),
    }
