"""Levi-Civita geometry, curvature and the Kähler algebraic operators.

Sign conventions:

* ``R(X,Y)Z = [nabla_X, nabla_Y]Z - nabla_[X,Y] Z``; ``Ric_bd = R^a_bad``; the
  unit round 2-sphere has scalar curvature +2.
* ``d* alpha = -sum_i e_i _| nabla_{e_i} alpha`` and ``Delta = d* d`` on
  functions, so ``Delta sin(x) = sin(x)`` on the flat line.
* ``omega = g(J., .)`` and ``rho = Ric(J., .)``.
* 1-forms carry ``(J beta)(X) = beta(J X)``.
* ``N(X,Y) = [X,Y] + J[JX,Y] + J[X,JY] - [JX,JY]``.
"""

from __future__ import annotations

import numpy as np

from . import jets as jt
from .fields import (
    Coords,
    EndoField,
    Field,
    KForm,
    MetricField,
    ScalarField,
    VectorField,
)
from .forms import compress, compress_jet, full_jet, two_form_from_matrix
from .jets import Jet, jeinsum, relabel

__all__ = [
    "FrameError",
    "SingularMetricError",
    "central_difference",
    "christoffel_field",
    "christoffels",
    "codifferential",
    "codifferential_field",
    "covariant_derivative_endo",
    "covariant_derivative_form",
    "fundamental_form",
    "j_on_one_form",
    "laplacian",
    "laplacian_field",
    "lowered_riemann_field",
    "lstar",
    "lstar_field",
    "metric_from_form",
    "metric_inverse",
    "nijenhuis",
    "nijenhuis_field",
    "orthonormal_frame",
    "ricci_field",
    "ricci_form_field",
    "riemann_field",
    "riemann_ricci_scalar",
    "scalar_curvature_field",
    "sharp",
]


class SingularMetricError(ValueError):
    pass


class FrameError(ValueError):
    pass


_COND_LIMIT = 1e12
_LETTERS = "ijklnopqrstuvwxy"


def _check_metric(g0: np.ndarray) -> None:
    cond = np.linalg.cond(g0)
    bad = ~np.isfinite(cond) | (cond > _COND_LIMIT)
    if np.any(bad):
        k = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise SingularMetricError(f"metric singular at sample {k}: condition number {cond[k]:.3e}")


def metric_inverse(c: Coords, g: MetricField) -> Jet:
    key = ("ginv", id(g), c.var)
    hit = c.memo.get(key)
    if hit is not None:
        return hit[1]
    gv = g(c)
    _check_metric(gv.value)
    out = jt.inv(gv)
    c.memo[key] = (g, out)
    return out


def christoffel_field(g: MetricField) -> Field:
    """Gamma^a_bc as jet array ``[a, b, c]``."""

    def fn(c: Coords) -> Jet:
        dg = c.grad(g(c))  # [p, q, k] = d_k g_pq
        low = relabel("...dcb->...dbc", dg) + dg - relabel("...bcd->...dbc", dg)
        return jeinsum("...ad,...dbc->...abc", metric_inverse(c, g), low) * 0.5

    return Field(fn, g.dim, g.loss + 1, "christoffel")


def christoffels(g: MetricField, points) -> np.ndarray:
    return christoffel_field(g).values(points)


def riemann_field(g: MetricField) -> Field:
    """R^a_bcd as jet array ``[a, b, c, d]``."""
    gam = christoffel_field(g)

    def fn(c: Coords) -> Jet:
        G = gam(c)
        dG = c.grad(G)  # [a, b, c, k] = d_k Gamma^a_bc
        r = relabel("...adbc->...abcd", dG) - relabel("...acbd->...abcd", dG)
        r = r + jeinsum("...ace,...edb->...abcd", G, G)
        return r - jeinsum("...ade,...ecb->...abcd", G, G)

    return Field(fn, g.dim, g.loss + 2, "riemann")


def lowered_riemann_field(g: MetricField) -> Field:
    riem = riemann_field(g)
    return Field(lambda c: jeinsum("...ae,...ebcd->...abcd", g(c), riem(c)), g.dim, riem.loss, "riemann_low")


def ricci_field(g: MetricField) -> MetricField:
    riem = riemann_field(g)
    return MetricField(lambda c: relabel("...abad->...bd", riem(c)), g.dim, riem.loss, "ricci")


def scalar_curvature_field(g: MetricField) -> ScalarField:
    ric = ricci_field(g)
    return ScalarField(lambda c: jeinsum("...ab,...ab->...", metric_inverse(c, g), ric(c)), g.dim, ric.loss, "scal")


def riemann_ricci_scalar(g: MetricField, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lowered curvature tensor ``R_abcd = g_ae R^e_bcd``, Ricci matrix and scalar at points."""
    low, ric, scal = lowered_riemann_field(g), ricci_field(g), scalar_curvature_field(g)
    both = Field(lambda c: jt.concatenate([low(c).reshape(len(c.x), -1), ric(c).reshape(len(c.x), -1), scal(c).expand(-1)], axis=-1), g.dim, low.loss)
    flat = both.values(points)
    d = g.dim
    return flat[:, : d**4].reshape(-1, d, d, d, d), flat[:, d**4: d**4 + d * d].reshape(-1, d, d), flat[:, -1]


def covariant_derivative_endo(g: MetricField, t: EndoField) -> Field:
    """(nabla_k T)^a_b as jet array ``[k, a, b]``."""
    gam = christoffel_field(g)

    def fn(c: Coords) -> Jet:
        T, G = t(c), gam(c)
        out = relabel("...abk->...kab", c.grad(T))
        out = out + jeinsum("...akc,...cb->...kab", G, T)
        return out - jeinsum("...ckb,...ac->...kab", G, T)

    return Field(fn, g.dim, max(g.loss + 1, t.loss + 1), "nabla_endo")


def _nabla_full(c: Coords, g: MetricField, gam: Field, comp: Jet, d: int, k: int) -> Jet:
    """(nabla_m alpha)_{i1..ik} as full jet array ``[m, i1, .., ik]``."""
    A = full_jet(comp, d, k)
    lets = _LETTERS[:k]
    dA = c.grad(A)  # [i1..ik, m]
    out = relabel(f"...{lets}m->...m{lets}", dA)
    G = gam(c)
    for s in range(k):
        src = lets[:s] + "c" + lets[s + 1:]
        out = out - jeinsum(f"...{src},...cm{lets[s]}->...m{lets}", A, G)
    return out


def covariant_derivative_form(g: MetricField, alpha: KForm) -> Field:
    gam = christoffel_field(g)
    d, k = alpha.dim, alpha.degree
    return Field(lambda c: _nabla_full(c, g, gam, alpha(c), d, k), d, max(g.loss, alpha.loss) + 1, "nabla_form")


def codifferential_field(g: MetricField, alpha: KForm) -> KForm:
    if alpha.degree == 0:
        raise ValueError("codifferential of a 0-form")
    gam = christoffel_field(g)
    d, k = alpha.dim, alpha.degree
    lets = _LETTERS[: k - 1]

    def fn(c: Coords) -> Jet:
        nab = _nabla_full(c, g, gam, alpha(c), d, k)
        tr = -jeinsum(f"...ab,...ab{lets}->...{lets}", metric_inverse(c, g), nab)
        if k == 1:
            return tr.expand(-1)
        return compress_jet(tr, d, k - 1)

    return KForm.build(fn, d, k - 1, (g, alpha), extra=1, name="codiff")


def codifferential(g: MetricField, alpha: KForm, points) -> np.ndarray:
    return codifferential_field(g, alpha).values(points)


def laplacian_field(g: MetricField, f: ScalarField) -> ScalarField:
    gam = christoffel_field(g)

    def fn(c: Coords) -> Jet:
        F = f(c)
        df = c.grad(F)
        hess = c.grad(df) - jeinsum("...cab,...c->...ab", gam(c), df)
        return -jeinsum("...ab,...ab->...", metric_inverse(c, g), hess)

    return ScalarField(fn, g.dim, max(g.loss + 1, f.loss + 2), "laplacian")


def laplacian(g: MetricField, f: ScalarField, points) -> np.ndarray:
    return laplacian_field(g, f).values(points)


def sharp(g: MetricField, beta: KForm) -> VectorField:
    return VectorField.build(lambda c: jeinsum("...ab,...b->...a", metric_inverse(c, g), beta(c)), g.dim, (g, beta))


def j_on_one_form(J: EndoField, beta: KForm) -> KForm:
    """``(J beta)(X) = beta(J X)``."""
    return KForm.build(lambda c: jeinsum("...a,...ab->...b", beta(c), J(c)), J.dim, 1, (J, beta))


def fundamental_form(g: MetricField, J: EndoField) -> KForm:
    """``omega(X, Y) = g(JX, Y)``."""
    mat = Field(lambda c: jeinsum("...ki,...kj->...ij", J(c), g(c)), g.dim, max(g.loss, J.loss))
    return two_form_from_matrix(mat, "omega")


def metric_from_form(omega: KForm, J: EndoField) -> MetricField:
    """``g(X, Y) = omega(X, JY)``, the inverse of :func:`fundamental_form`."""
    d = omega.dim
    return MetricField.build(lambda c: jeinsum("...ac,...cb->...ab", full_jet(omega(c), d, 2), J(c)), d, (omega, J), name="g")


def ricci_form_field(g: MetricField, J: EndoField) -> KForm:
    """``rho(X, Y) = Ric(JX, Y)``."""
    ric = ricci_field(g)
    mat = Field(lambda c: jeinsum("...ki,...kj->...ij", J(c), ric(c)), g.dim, max(ric.loss, J.loss))
    return two_form_from_matrix(mat, "rho")


def nijenhuis_field(J: EndoField) -> Field:
    """N^a_ij as jet array ``[a, i, j]``."""

    def fn(c: Coords) -> Jet:
        Jv = J(c)
        dJ = c.grad(Jv)  # [a, b, k] = d_k J^a_b
        skew = relabel("...cji->...cij", dJ) - dJ  # [c, i, j] = d_i J^c_j - d_j J^c_i
        t1 = jeinsum("...ac,...cij->...aij", Jv, skew)
        t2 = jeinsum("...ki,...ajk->...aij", Jv, dJ)
        return t1 - t2 + relabel("...aji->...aij", t2)

    return Field(fn, J.dim, J.loss + 1, "nijenhuis")


def nijenhuis(J: EndoField, points) -> np.ndarray:
    return nijenhuis_field(J).values(points)


def orthonormal_frame(gv: np.ndarray, basis: np.ndarray | None = None, tol: float = 1e-12) -> np.ndarray:
    """Gram-Schmidt on the columns of ``basis`` (default: coordinate frame), batched.

    Returns ``(B, d, r)`` with g-orthonormal columns, in the input column order.
    """
    gv = np.asarray(gv, float)
    bsz, d, _ = gv.shape
    if basis is None:
        basis = np.broadcast_to(np.eye(d), (bsz, d, d))
    cols = []
    for j in range(basis.shape[-1]):
        v = basis[:, :, j].copy()
        for e in cols:
            v -= np.einsum("ba,bac,bc->b", e, gv, v)[:, None] * e
        nrm2 = np.einsum("ba,bac,bc->b", v, gv, v)
        if np.any(nrm2 <= tol):
            k = int(np.argmin(nrm2))
            raise FrameError(f"Gram-Schmidt pivot {nrm2[k]:.3e} below {tol} at sample {k}, column {j}")
        cols.append(v / np.sqrt(nrm2)[:, None])
    return np.stack(cols, axis=-1)


def lstar(omega: KForm, J: EndoField, alpha: KForm, points) -> np.ndarray:
    """``L* alpha = 1/2 sum_i alpha(e_i, J e_i, ...)`` over a g-orthonormal frame.

    Returns increasing components of the (k-2)-form; a zero 0-form array of
    shape ``(B, 1)`` when ``deg alpha < 2``.
    """
    pts = np.atleast_2d(points)
    d, k = alpha.dim, alpha.degree
    if k < 2:
        return np.zeros((len(pts), 1))
    gv = metric_from_form(omega, J).values(pts)
    Jv = J.values(pts)
    E = orthonormal_frame(gv)
    JE = np.einsum("bac,bci->bai", Jv, E)
    A = full_jet(alpha.jet(pts, 0), d, k).value
    out = 0.5 * np.einsum("bai,bci,bac...->b...", E, JE, A)
    if k == 2:
        return out[:, None]
    return compress(out, d, k - 2)


def lstar_field(g: MetricField, J: EndoField, alpha: KForm) -> KForm:
    """Frame-free L*: contraction with the bivector ``J g^{-1}``."""
    d, k = alpha.dim, alpha.degree
    if k < 2:
        raise ValueError("L* of a form of degree < 2")
    lets = _LETTERS[: k - 2]

    def fn(c: Coords) -> Jet:
        biv = jeinsum("...ac,...cb->...ab", J(c), metric_inverse(c, g))
        out = jeinsum(f"...ab,...ba{lets}->...{lets}", biv, full_jet(alpha(c), d, k)) * 0.5
        return out.expand(-1) if k == 2 else compress_jet(out, d, k - 2)

    return KForm.build(fn, d, k - 2, (g, J, alpha), name="lstar")


def central_difference(fn, points: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference partials of ``fn(points) -> (B, ...)``, stacked on a new last axis."""
    pts = np.atleast_2d(np.asarray(points, float))
    cols = []
    for i in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[i] = h
        cols.append((fn(pts + e) - fn(pts - e)) / (2 * h))
    return np.stack(cols, axis=-1)
