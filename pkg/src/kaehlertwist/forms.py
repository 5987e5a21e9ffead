"""Exterior calculus on increasing-index form components.

Conventions: ``(dx^1 ^ dx^2)(d_1, d_2) = 1``; the component of a k-form on
the increasing tuple ``I`` is its value on the coordinate vectors of ``I``;
interior products contract the first slot.
"""

from __future__ import annotations

import itertools
from functools import cache
from math import comb, factorial

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
from .jets import Jet

__all__ = [
    "compress",
    "compress_jet",
    "d_jet",
    "evaluate_form",
    "exterior_derivative",
    "form_from_components",
    "full",
    "full_jet",
    "interior_jet",
    "interior_product",
    "lie_derivative",
    "lie_form_coordinates",
    "lift",
    "tuples",
    "two_form_from_matrix",
    "two_form_matrix",
    "wedge",
    "wedge_jet",
]


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@cache
def tuples(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(d), k))


@cache
def _index(d: int, k: int) -> dict:
    return {t: i for i, t in enumerate(tuples(d, k))}


def _flat(t, d) -> int:
    f = 0
    for i in t:
        f = f * d + i
    return f


@cache
def _full_table(d: int, k: int):
    src, dst, sgn = [], [], []
    for n, t in enumerate(tuples(d, k)):
        for perm in itertools.permutations(range(k)):
            src.append(n)
            dst.append(_flat([t[p] for p in perm], d))
            sgn.append(_perm_sign(perm))
    compress_idx = np.array([_flat(t, d) for t in tuples(d, k)], dtype=np.int64)
    return np.array(src), np.array(dst), np.array(sgn, float), compress_idx


@cache
def _d_table(d: int, k: int):
    idx = _index(d, k)
    out = tuples(d, k + 1)
    src = np.empty((len(out), k + 1), dtype=np.int64)
    der = np.empty((len(out), k + 1), dtype=np.int64)
    sgn = np.empty((len(out), k + 1))
    for n, t in enumerate(out):
        for j in range(k + 1):
            src[n, j] = idx[t[:j] + t[j + 1:]]
            der[n, j] = t[j]
            sgn[n, j] = (-1) ** j
    return src, der, sgn


@cache
def _wedge_table(d: int, k: int, l: int):
    idx = _index(d, k + l)
    ia, ib, rows = [], [], []
    nout = comb(d, k + l)
    for a, ta in enumerate(tuples(d, k)):
        for b, tb in enumerate(tuples(d, l)):
            if set(ta) & set(tb):
                continue
            merged = ta + tb
            rows.append((idx[tuple(sorted(merged))], _perm_sign(merged)))
            ia.append(a)
            ib.append(b)
    scatter = np.zeros((len(rows), nout))
    for p, (o, s) in enumerate(rows):
        scatter[p, o] = s
    return np.array(ia, dtype=np.int64), np.array(ib, dtype=np.int64), scatter


@cache
def _interior_table(d: int, k: int):
    idx = _index(d, k)
    iv, ia, rows = [], [], []
    nout = comb(d, k - 1)
    for o, t in enumerate(tuples(d, k - 1)):
        for i in range(d):
            if i in t:
                continue
            merged = tuple(sorted((i,) + t))
            iv.append(i)
            ia.append(idx[merged])
            rows.append((o, (-1) ** merged.index(i)))
    scatter = np.zeros((len(rows), nout))
    for p, (o, s) in enumerate(rows):
        scatter[p, o] = s
    return np.array(iv, dtype=np.int64), np.array(ia, dtype=np.int64), scatter


def _scatter(prod: Jet, scatter: np.ndarray) -> Jet:
    return Jet(np.einsum("...pz,pq->...qz", prod.c, scatter), prod.nvars, prod.order)


# -- jet-level kernels -----------------------------------------------------

def full_jet(comp: Jet, d: int, k: int) -> Jet:
    """Alternating array ``(B,) + (d,)*k`` from increasing components ``(B, C(d,k))``."""
    src, dst, sgn, _ = _full_table(d, k)
    bsz = comp.shape[:-1]
    c = np.zeros(bsz + (d**k, comp.c.shape[-1]))
    c[..., dst, :] = comp.c[..., src, :] * sgn[:, None]
    return Jet(c.reshape(bsz + (d,) * k + (comp.c.shape[-1],)), comp.nvars, comp.order)


def compress_jet(arr: Jet, d: int, k: int) -> Jet:
    """Increasing components of an alternating jet array (no antisymmetrisation)."""
    *_, cidx = _full_table(d, k)
    bsz = arr.shape[: arr.ndim - k]
    flat = arr.c.reshape(bsz + (d**k, arr.c.shape[-1]))
    return Jet(flat[..., cidx, :], arr.nvars, arr.order)


def antisymmetrize_jet(arr: Jet, d: int, k: int) -> Jet:
    """Increasing components of the alternating part of a k-index jet array."""
    nb = arr.ndim - k
    acc = None
    for perm in itertools.permutations(range(k)):
        axes = tuple(range(nb)) + tuple(nb + p for p in perm) + (arr.ndim,)
        term = Jet(np.transpose(arr.c, axes), arr.nvars, arr.order) * float(_perm_sign(perm))
        acc = term if acc is None else acc + term
    return compress_jet(acc * (1.0 / factorial(k)), d, k)


def d_jet(comp: Jet, c: Coords, k: int) -> Jet:
    d = c.dim
    if k >= d:
        raise ValueError("top-degree form: exterior derivative vanishes identically and is not represented")
    g = c.grad(comp)  # (B, C(d,k), d)
    src, der, sgn = _d_table(d, k)
    terms = g[:, src, der] * sgn
    return terms.sum(axis=-1)


def wedge_jet(a: Jet, b: Jet, d: int, k: int, l: int) -> Jet:
    if k + l > d:
        raise ValueError(f"degree overflow: {k} + {l} > {d}")
    ia, ib, scatter = _wedge_table(d, k, l)
    if len(ia) == 0:
        return Jet(np.zeros(a.shape[:-1] + (comb(d, k + l), min(a.c.shape[-1], b.c.shape[-1]))), a.nvars, min(a.order, b.order))
    return _scatter(a[..., ia] * b[..., ib], scatter)


def interior_jet(x: Jet, a: Jet, d: int, k: int) -> Jet:
    if k == 0:
        raise ValueError("interior product of a 0-form")
    iv, ia, scatter = _interior_table(d, k)
    return _scatter(x[..., iv] * a[..., ia], scatter)


# -- field-level operations ------------------------------------------------

def form_from_components(fn, dim: int, degree: int, name: str = "") -> KForm:
    return KForm(fn, dim, degree, 0, name)


def two_form_from_matrix(mat: Field, name: str = "") -> KForm:
    """2-form whose component on (i, j) is ``mat[i, j]`` (antisymmetric part assumed)."""
    d = mat.dim
    rows, cols = np.triu_indices(d, 1)
    return KForm.build(lambda c: mat(c)[:, rows, cols], d, 2, (mat,), name=name)


def two_form_matrix(c: Coords, form: KForm) -> Jet:
    return full_jet(form(c), form.dim, 2)


def full(form: KForm, points) -> np.ndarray:
    """Alternating component arrays of a form at points."""
    return full_jet(form.jet(points, 0), form.dim, form.degree).value


def compress(arr: np.ndarray, d: int, k: int) -> np.ndarray:
    *_, cidx = _full_table(d, k)
    return arr.reshape(arr.shape[: arr.ndim - k] + (d**k,))[..., cidx]


def evaluate_form(form: KForm, points, vectors: list[np.ndarray]) -> np.ndarray:
    """Value of the form on the given vectors (each ``(B, d)`` or ``(d,)``)."""
    arr = full(form, points)
    for v in vectors:
        v = np.broadcast_to(np.asarray(v, float), arr.shape[:1] + (form.dim,))
        arr = np.einsum("bi,bi...->b...", v, arr)
    return arr


def exterior_derivative(alpha: KForm | ScalarField) -> KForm:
    if isinstance(alpha, ScalarField):
        f = alpha
        return KForm.build(lambda c: c.grad(f(c)), f.dim, 1, (f,), extra=1, name=f"d{f.name}")
    if alpha.degree >= alpha.dim:
        raise ValueError("top-degree form: exterior derivative vanishes identically and is not represented")
    k = alpha.degree
    return KForm.build(lambda c: d_jet(alpha(c), c, k), alpha.dim, k + 1, (alpha,), extra=1, name=f"d{alpha.name}")


def wedge(alpha: KForm | ScalarField, beta: KForm | ScalarField) -> KForm:
    if isinstance(alpha, ScalarField):
        return beta * alpha
    if isinstance(beta, ScalarField):
        return alpha * beta
    d, k, l = alpha.dim, alpha.degree, beta.degree
    if k + l > d:
        raise ValueError(f"degree overflow: {k} + {l} > {d}")
    return KForm.build(lambda c: wedge_jet(alpha(c), beta(c), d, k, l), d, k + l, (alpha, beta))


def interior_product(x: VectorField, alpha: KForm) -> KForm:
    if alpha.degree == 0:
        raise ValueError("interior product of a 0-form")
    d, k = alpha.dim, alpha.degree
    return KForm.build(lambda c: interior_jet(x(c), alpha(c), d, k), d, k - 1, (x, alpha))


def _lie_form(x: VectorField, alpha: KForm) -> KForm:
    if alpha.degree == 0:
        f = alpha
        return KForm.build(lambda c: jt.jeinsum("...a,...ia->...i", x(c), c.grad(f(c))), f.dim, 0, (x, f), extra=1)
    out = exterior_derivative(interior_product(x, alpha))
    if alpha.degree < alpha.dim:
        out = out + interior_product(x, exterior_derivative(alpha))
    return out


def lie_form_coordinates(x: VectorField, alpha: KForm) -> KForm:
    """Lie derivative of a form from the coordinate formula; cross-check for Cartan's formula."""
    d, k = alpha.dim, alpha.degree

    def fn(c: Coords) -> Jet:
        comp = alpha(c)
        xv = x(c)
        out = jt.jeinsum("...a,...ia->...i", xv, c.grad(comp))
        if k == 0:
            return out
        arr = full_jet(comp, d, k)
        dx = c.grad(xv)  # [a, s] = d_s X^a
        dx = Jet(dx.c.reshape((dx.shape[0],) + (1,) * (k - 1) + (d, d, dx.c.shape[-1])), dx.nvars, dx.order)
        acc = None
        for slot in range(k):
            moved = arr.moveaxis(1 + slot, -1)  # contracted index last
            term = jt.jeinsum("...a,...as->...s", moved, dx).moveaxis(-1, 1 + slot)
            acc = term if acc is None else acc + term
        return out + compress_jet(acc, d, k)

    return KForm.build(fn, d, k, (x, alpha), extra=1)


def _lie_metric(x: VectorField, g: MetricField) -> MetricField:
    def fn(c: Coords) -> Jet:
        gv, xv = g(c), x(c)
        dx = c.grad(xv)  # [c, a] = d_a X^c
        t = jt.jeinsum("...c,...abc->...ab", xv, c.grad(gv))
        s = jt.jeinsum("...cb,...ca->...ab", gv, dx)
        return t + s + s.mT

    return MetricField.build(fn, g.dim, (x, g), extra=1, name=f"L_{x.name}{g.name}")


def _lie_endo(x: VectorField, t: EndoField) -> EndoField:
    def fn(c: Coords) -> Jet:
        tv, xv = t(c), x(c)
        dx = c.grad(xv)  # [a, c] = d_c X^a
        out = jt.jeinsum("...c,...abc->...ab", xv, c.grad(tv))
        out = out - jt.jeinsum("...ac,...cb->...ab", dx, tv)
        return out + jt.jeinsum("...ac,...cb->...ab", tv, dx)

    return EndoField.build(fn, t.dim, (x, t), extra=1, name=f"L_{x.name}{t.name}")


def lie_derivative(x: VectorField, tensor):
    if isinstance(tensor, KForm):
        return _lie_form(x, tensor)
    if isinstance(tensor, MetricField):
        return _lie_metric(x, tensor)
    if isinstance(tensor, EndoField):
        return _lie_endo(x, tensor)
    if isinstance(tensor, ScalarField):
        f = tensor
        return ScalarField.build(lambda c: jt.jeinsum("...a,...a->...", x(c), c.grad(f(c))), f.dim, (x, f), extra=1)
    raise TypeError(f"no Lie derivative for {type(tensor).__name__}")


# -- pullback along factor projections ---------------------------------------

@cache
def _lift_index(d_small: int, d_total: int, start: int, k: int) -> np.ndarray:
    big = _index(d_total, k)
    return np.array([big[tuple(start + i for i in t)] for t in tuples(d_small, k)], dtype=np.int64)


def lift(f: Field, total_dim: int, start: int) -> Field:
    """Pull a factor-chart field back to a product chart (vectors and endomorphisms are pushed in).

    The factor occupies coordinates ``start .. start + f.dim`` of the product.
    """
    n = f.dim
    stop = start + n

    def sub(c: Coords) -> Jet:
        return f(c.sub(start, stop))

    if isinstance(f, ScalarField):
        return ScalarField.build(sub, total_dim, (f,), name=f.name)
    if isinstance(f, VectorField):
        def vec(c):
            return _pad(sub(c), c, (total_dim,), (slice(start, stop),))
        return VectorField.build(vec, total_dim, (f,), name=f.name)
    if isinstance(f, (EndoField, MetricField)):
        def mat(c):
            return _pad(sub(c), c, (total_dim, total_dim), (slice(start, stop), slice(start, stop)))
        if isinstance(f, EndoField):
            return EndoField.build(mat, total_dim, (f,), name=f.name, complex_structure=False)
        return MetricField.build(mat, total_dim, (f,), name=f.name)
    if isinstance(f, KForm):
        k = f.degree
        idx = _lift_index(n, total_dim, start, k)
        ncomp = comb(total_dim, k)

        def form(c):
            v = sub(c)
            out = np.zeros(v.shape[:-1] + (ncomp, v.c.shape[-1]))
            out[..., idx, :] = v.c
            return Jet(out, v.nvars, v.order)
        return KForm.build(form, total_dim, k, (f,), name=f.name)
    raise TypeError(f"cannot lift {type(f).__name__}")


def _pad(v: Jet, c: Coords, shape, where) -> Jet:
    out = np.zeros((v.shape[0],) + tuple(shape) + (v.c.shape[-1],))
    out[(slice(None),) + tuple(where)] = v.c
    return Jet(out, v.nvars, v.order)
