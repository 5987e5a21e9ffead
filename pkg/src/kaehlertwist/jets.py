"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients of a batch of smooth functions
of ``nvars`` seed variables up to a fixed total degree.  Coefficients live on
the last axis, ordered by graded monomials, so truncating to a lower order is
a slice.  All leading axes are ordinary array axes (sample batch first, then
tensor indices), and indexing a jet indexes those leading axes only.

Products truncate to the smaller of the two orders and differentiation lowers
the order by one, so a computation that differentiates ``k`` times must be
seeded ``k`` orders above what the caller wants back.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from functools import cache
from math import factorial

import numpy as np

__all__ = [
    "Jet",
    "compose",
    "concatenate",
    "constant",
    "cos",
    "exp",
    "inv",
    "jeinsum",
    "log",
    "power",
    "relabel",
    "sin",
    "sqrt",
    "stack",
    "variables",
    "where_order",
]


class _Basis:
    """Graded monomials of degree <= order in nvars variables, plus product tables."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        exps = [(0,) * nvars]
        for deg in range(1, order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                e = [0] * nvars
                for i in combo:
                    e[i] += 1
                exps.append(tuple(e))
        self.exps = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.index = {e: k for k, e in enumerate(exps)}
        self.size = len(exps)
        self.degree = self.exps.sum(axis=1)

        ia, ib, ic = [], [], []
        for a, ea in enumerate(exps):
            da = self.degree[a]
            for b in range(self.size):
                if da + self.degree[b] > order:
                    break
                ia.append(a)
                ib.append(b)
                ic.append(self.index[tuple(x + y for x, y in zip(ea, exps[b]))])
        ic = np.array(ic)
        perm = np.argsort(ic, kind="stable")
        self.ia = np.array(ia)[perm]
        self.ib = np.array(ib)[perm]
        sorted_c = ic[perm]
        self.starts = np.flatnonzero(np.r_[True, sorted_c[1:] != sorted_c[:-1]])

    @cache
    def diff_table(self, var: int):
        low = _basis(self.nvars, self.order - 1)
        src = np.empty(low.size, dtype=np.int64)
        fac = np.empty(low.size)
        for k, e in enumerate(map(tuple, low.exps)):
            up = list(e)
            up[var] += 1
            src[k] = self.index[tuple(up)]
            fac[k] = up[var]
        return src, fac

    @cache
    def derivative_table(self, k: int):
        """Flat monomial index and multiplicity alpha! for every k-tuple of variables."""
        idx = np.empty(self.nvars**k, dtype=np.int64)
        mult = np.empty(self.nvars**k)
        for flat, tup in enumerate(itertools.product(range(self.nvars), repeat=k)):
            e = [0] * self.nvars
            for i in tup:
                e[i] += 1
            idx[flat] = self.index[tuple(e)]
            mult[flat] = np.prod([factorial(x) for x in e])
        return idx, mult


@cache
def _basis(nvars: int, order: int) -> _Basis:
    return _Basis(nvars, order)


def _nmono(nvars: int, order: int) -> int:
    return _basis(nvars, order).size


class Jet:
    """Batch of truncated Taylor expansions.

    Parameters
    ----------
    c : ndarray
        Coefficients, shape ``leading_shape + (n_monomials,)``.
    nvars, order : int
        Number of seed variables and truncation degree.
    """

    __slots__ = ("c", "nvars", "order")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, c: np.ndarray, nvars: int, order: int):
        self.c = c
        self.nvars = nvars
        self.order = order

    # -- structure -----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, nvars={self.nvars}, order={self.order})"

    def truncate(self, order: int) -> Jet:
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        return Jet(self.c[..., : _nmono(self.nvars, order)], self.nvars, order)

    def __getitem__(self, key) -> Jet:
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            key = key + (slice(None),)
        return Jet(self.c[key], self.nvars, self.order)

    def __len__(self) -> int:
        return self.shape[0]

    def reshape(self, *shape) -> Jet:
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.c.reshape(tuple(shape) + (self.c.shape[-1],)), self.nvars, self.order)

    def moveaxis(self, src: int, dst: int) -> Jet:
        return Jet(np.moveaxis(self.c, _lead(src, self.ndim), _lead(dst, self.ndim)), self.nvars, self.order)

    def swapaxes(self, a: int, b: int) -> Jet:
        return Jet(np.swapaxes(self.c, _lead(a, self.ndim), _lead(b, self.ndim)), self.nvars, self.order)

    @property
    def mT(self) -> Jet:
        return self.swapaxes(-1, -2)

    def sum(self, axis=None) -> Jet:
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis,)
        axes = tuple(_lead(a, self.ndim) for a in axis)
        return Jet(self.c.sum(axis=axes), self.nvars, self.order)

    def expand(self, axis: int) -> Jet:
        return Jet(np.expand_dims(self.c, _lead(axis, self.ndim + 1)), self.nvars, self.order)

    def broadcast_to(self, shape) -> Jet:
        return Jet(np.broadcast_to(self.c, tuple(shape) + (self.c.shape[-1],)), self.nvars, self.order)

    # -- derivatives ---------------------------------------------------
    def diff(self, var: int) -> Jet:
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _basis(self.nvars, self.order).diff_table(var)
        return Jet(self.c[..., src] * fac, self.nvars, self.order - 1)

    def grad(self, vars: Sequence[int] | None = None) -> Jet:
        """Partial derivatives stacked on a new trailing leading axis."""
        if vars is None:
            vars = range(self.nvars)
        return stack([self.diff(v) for v in vars], axis=-1)

    def derivative(self, k: int) -> np.ndarray:
        """Symmetric array of k-th partials of the value, shape ``shape + (nvars,)*k``."""
        if k > self.order:
            raise ValueError(f"jet of order {self.order} has no derivative of order {k}")
        idx, mult = _basis(self.nvars, self.order).derivative_table(k)
        out = self.c[..., idx] * mult
        return out.reshape(self.shape + (self.nvars,) * k)

    @property
    def gradient(self) -> np.ndarray:
        return self.derivative(1)

    @property
    def hessian(self) -> np.ndarray:
        return self.derivative(2)

    # -- arithmetic ----------------------------------------------------
    def _const(self, other) -> np.ndarray:
        return np.asarray(other, dtype=float)

    def __neg__(self) -> Jet:
        return Jet(-self.c, self.nvars, self.order)

    def __pos__(self) -> Jet:
        return self

    def __add__(self, other) -> Jet:
        if isinstance(other, Jet):
            a, b = _align(self, other)
            return Jet(a.c + b.c, a.nvars, a.order)
        c = np.array(np.broadcast_arrays(self.c, self._const(other)[..., None])[0], dtype=float)
        c[..., 0] = c[..., 0] + self._const(other)
        return Jet(c, self.nvars, self.order)

    __radd__ = __add__

    def __sub__(self, other) -> Jet:
        return self + (-other)

    def __rsub__(self, other) -> Jet:
        return (-self) + other

    def __mul__(self, other) -> Jet:
        if isinstance(other, Jet):
            return _mul(self, other)
        return Jet(self.c * self._const(other)[..., None], self.nvars, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other) -> Jet:
        if isinstance(other, Jet):
            return self * power(other, -1.0)
        return Jet(self.c / self._const(other)[..., None], self.nvars, self.order)

    def __rtruediv__(self, other) -> Jet:
        return power(self, -1.0) * other

    def __pow__(self, p) -> Jet:
        return power(self, p)


def _lead(axis: int, ndim: int) -> int:
    return axis if axis >= 0 else axis + ndim


def _align(a: Jet, b: Jet) -> tuple[Jet, Jet]:
    if a.nvars != b.nvars:
        raise ValueError("jets over different seed variables")
    k = min(a.order, b.order)
    return a.truncate(k), b.truncate(k)


def _reduce_pairs(prod: np.ndarray, basis: _Basis) -> np.ndarray:
    return np.add.reduceat(prod, basis.starts, axis=-1)


def _mul(a: Jet, b: Jet) -> Jet:
    a, b = _align(a, b)
    if a.order == 0:
        return Jet(a.c * b.c, a.nvars, 0)
    basis = _basis(a.nvars, a.order)
    prod = a.c[..., basis.ia] * b.c[..., basis.ib]
    return Jet(_reduce_pairs(prod, basis), a.nvars, a.order)


def jeinsum(subscripts: str, a, b) -> Jet:
    """Einstein summation of two operands, at least one a jet.

    Subscripts must start every operand with ``...`` for the batch axes,
    for example ``"...ij,...jk->...ik"``.
    """
    ins, out = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        a, b = _align(a, b)
        if a.order == 0:
            return Jet(np.einsum(f"{sa}z,{sb}z->{out}z", a.c, b.c), a.nvars, 0)
        basis = _basis(a.nvars, a.order)
        prod = np.einsum(f"{sa}z,{sb}z->{out}z", a.c[..., basis.ia], b.c[..., basis.ib])
        return Jet(_reduce_pairs(prod, basis), a.nvars, a.order)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"{sa}z,{sb}->{out}z", a.c, np.asarray(b, float)), a.nvars, a.order)
    if isinstance(b, Jet):
        return Jet(np.einsum(f"{sa},{sb}z->{out}z", np.asarray(a, float), b.c), b.nvars, b.order)
    raise TypeError("jeinsum needs at least one Jet operand")


def relabel(subscripts: str, a: Jet) -> Jet:
    """Single-operand einsum on the leading axes (transpose, trace, diagonal)."""
    ins, out = subscripts.replace(" ", "").split("->")
    return Jet(np.einsum(f"{ins}z->{out}z", a.c), a.nvars, a.order)


def variables(points: np.ndarray, order: int) -> Jet:
    """Seed jets for coordinates: shape ``(B, d)`` with d seed variables."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    bsz, d = points.shape
    c = np.zeros((bsz, d, _nmono(d, order)))
    c[:, :, 0] = points
    if order >= 1:
        c[:, np.arange(d), 1 + np.arange(d)] = 1.0
    return Jet(c, d, order)


def constant(value, like: Jet) -> Jet:
    value = np.asarray(value, dtype=float)
    c = np.zeros(value.shape + (like.c.shape[-1],))
    c[..., 0] = value
    return Jet(c, like.nvars, like.order)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    nd = jets[0].ndim + 1
    return Jet(np.stack([j.c for j in jets], axis=_lead(axis, nd)), jets[0].nvars, order)


def concatenate(jets: Sequence[Jet], axis: int = 0) -> Jet:
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    return Jet(np.concatenate([j.c for j in jets], axis=_lead(axis, jets[0].ndim)), jets[0].nvars, order)


def where_order(j: Jet, order: int) -> Jet:
    return j.truncate(min(order, j.order))


# -- univariate composition ------------------------------------------------

def compose(a: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """Compose a jet with a function whose derivatives at ``a.value`` are given.

    ``derivs[k]`` is the k-th derivative evaluated at the value, broadcast to
    the jet's leading shape; at least ``a.order + 1`` entries are needed.
    """
    order = a.order
    h = Jet(a.c.copy(), a.nvars, order)
    h.c[..., 0] = 0.0
    res = constant(np.broadcast_to(derivs[order], a.shape) / factorial(order), a)
    for k in range(order - 1, -1, -1):
        res = res * h + np.broadcast_to(derivs[k], a.shape) / factorial(k)
    return res


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.value)
    return compose(a, [e] * (a.order + 1))


def log(a):
    if not isinstance(a, Jet):
        return np.log(a)
    x = a.value
    ds = [np.log(x)]
    for k in range(1, a.order + 1):
        ds.append((-1.0) ** (k - 1) * factorial(k - 1) / x**k)
    return compose(a, ds)


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    s, c = np.sin(a.value), np.cos(a.value)
    cyc = [s, c, -s, -c]
    return compose(a, [cyc[k % 4] for k in range(a.order + 1)])


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    s, c = np.sin(a.value), np.cos(a.value)
    cyc = [c, -s, -c, s]
    return compose(a, [cyc[k % 4] for k in range(a.order + 1)])


def power(a, p):
    if not isinstance(a, Jet):
        return np.power(a, p)
    p = float(p)
    if p.is_integer() and p >= 0:
        res = constant(np.ones(a.shape), a)
        for _ in range(int(p)):
            res = res * a
        return res
    x = a.value
    ds, coef = [], 1.0
    for k in range(a.order + 1):
        ds.append(coef * x ** (p - k))
        coef *= p - k
    return compose(a, ds)


def sqrt(a):
    return power(a, 0.5)


def inv(m: Jet) -> Jet:
    """Inverse of a batch of square jet matrices (last two leading axes)."""
    m0 = np.linalg.inv(m.value)
    h = Jet(m.c.copy(), m.nvars, m.order)
    h.c[..., 0] = 0.0
    # (M0 + H)^-1 = sum_k (-M0^-1 H)^k M0^-1, nilpotent to the jet order
    step = -jeinsum("...ij,...jk->...ik", m0, h)
    res = constant(m0, m)
    term = res
    for _ in range(m.order):
        term = jeinsum("...ij,...jk->...ik", step, term)
        res = res + term
    return res
