"""Chart domains, coordinate contexts and lazily evaluated field objects.

A field wraps a function ``fn(coords) -> Jet``.  Each field knows how many
derivatives its evaluation consumes (``loss``); evaluating at output order
``k`` seeds the coordinate jets at ``k + loss``.  Results are memoised per
evaluation on the seed, so shared sub-fields of a large expression graph are
computed once.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import jets as jt
from .jets import Jet

__all__ = [
    "DIM_CAP",
    "ChartDomain",
    "Coords",
    "EndoField",
    "Field",
    "KForm",
    "MetricField",
    "ScalarField",
    "VectorField",
    "as_points",
]

DIM_CAP = 8


@dataclass(frozen=True)
class ChartDomain:
    """Open box in R^dim used as a coordinate chart."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.bounds) < 1:
            raise ValueError("chart needs at least one coordinate")
        if len(self.bounds) > DIM_CAP:
            raise ValueError(f"chart dimension {len(self.bounds)} exceeds cap {DIM_CAP}")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"empty coordinate interval ({lo}, {hi})")

    @classmethod
    def box(cls, dim: int, radius: float) -> ChartDomain:
        return cls(tuple((-radius, radius) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def product(self, other: ChartDomain) -> ChartDomain:
        return ChartDomain(self.bounds + other.bounds)

    def sample(self, n: int, seed: int, shrink: float = 0.1) -> np.ndarray:
        """Scrambled Halton points in the box scaled by ``1 - shrink`` about its centre."""
        if n < 1:
            raise ValueError("need at least one sample")
        gen = qmc.Halton(d=self.dim, scramble=True, seed=np.random.default_rng(seed))
        u = gen.random(n)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        mid, half = (lo + hi) / 2, (hi - lo) / 2 * (1.0 - shrink)
        return mid - half + 2 * half * u

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((points > lo) & (points < hi), axis=-1)


class Coords:
    """Coordinate jets of a chart together with their seed-variable indices.

    ``var[i]`` is the seed variable that coordinate ``i`` is, so fields of a
    factor chart can be evaluated on a sub-selection of a product seed and
    still differentiate with respect to their own coordinates.
    """

    __slots__ = ("memo", "var", "x")

    def __init__(self, x: Jet, var: tuple[int, ...], memo: dict):
        self.x = x
        self.var = var
        self.memo = memo

    @classmethod
    def seed(cls, points: np.ndarray, order: int) -> Coords:
        x = jt.variables(points, order)
        return cls(x, tuple(range(x.nvars)), {})

    @property
    def dim(self) -> int:
        return len(self.var)

    def __getitem__(self, i: int) -> Jet:
        return self.x[:, i]

    def sub(self, start: int, stop: int) -> Coords:
        return Coords(self.x[:, start:stop], self.var[start:stop], self.memo)

    def diff(self, f: Jet, i: int) -> Jet:
        return f.diff(self.var[i])

    def grad(self, f: Jet) -> Jet:
        """Partials with respect to this chart's coordinates, on a new last axis."""
        return f.grad(self.var)

    def zeros(self, shape=()) -> Jet:
        return jt.constant(np.zeros((len(self.x),) + tuple(shape)), self.x)

    def const(self, value) -> Jet:
        value = np.asarray(value, dtype=float)
        return jt.constant(np.broadcast_to(value, (len(self.x),) + value.shape), self.x)


def as_points(points) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=float))


class Field:
    """Lazily evaluated tensor field on a chart of dimension ``dim``."""

    kind = "field"

    def __init__(self, fn: Callable[[Coords], Jet], dim: int, loss: int = 0, name: str = ""):
        self.fn = fn
        self.dim = dim
        self.loss = loss
        self.name = name or self.kind

    def __call__(self, c: Coords) -> Jet:
        if c.dim != self.dim:
            raise ValueError(f"{self.name}: chart dim {c.dim} != field dim {self.dim}")
        key = (id(self), c.var)
        hit = c.memo.get(key)
        if hit is not None:
            return hit[1]
        out = self.fn(c)
        c.memo[key] = (self, out)
        return out

    def jet(self, points, order: int = 0) -> Jet:
        pts = as_points(points)
        if pts.shape[1] != self.dim:
            raise ValueError(f"{self.name}: points have dim {pts.shape[1]}, field expects {self.dim}")
        out = self(Coords.seed(pts, order + self.loss))
        return out.truncate(order)

    def values(self, points) -> np.ndarray:
        return self.jet(points, 0).value


def _loss(deps: Sequence[Field]) -> int:
    return max((d.loss for d in deps), default=0)


class ScalarField(Field):
    """Real function, jet shape ``(B,)``."""

    kind = "scalar"

    def _binary(self, other, op) -> ScalarField:
        a = self
        if isinstance(other, ScalarField):
            return ScalarField.build(lambda c: op(a(c), other(c)), self.dim, (a, other))
        k = float(other)
        return ScalarField.build(lambda c: op(a(c), k), self.dim, (a,))

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return self._binary(other, lambda x, y: y - x)

    def __mul__(self, other):
        return self._binary(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda x, y: x / y)

    def __rtruediv__(self, other):
        return self._binary(other, lambda x, y: y / x)

    def __neg__(self):
        return self * -1.0

    def map(self, fn: Callable[[Jet], Jet], name: str = "") -> ScalarField:
        a = self
        return ScalarField.build(lambda c: fn(a(c)), self.dim, (a,), name=name)

    @classmethod
    def constant(cls, value: float, dim: int) -> ScalarField:
        return cls(lambda c: c.const(value), dim, 0, "const")

    @classmethod
    def build(cls, fn, dim, deps: Sequence[Field] = (), extra: int = 0, name: str = ""):
        return cls(fn, dim, _loss(deps) + extra, name)


class VectorField(Field):
    """Components ``X^a``, jet shape ``(B, d)``."""

    kind = "vector"

    @classmethod
    def build(cls, fn, dim, deps: Sequence[Field] = (), extra: int = 0, name: str = ""):
        return cls(fn, dim, _loss(deps) + extra, name)


class EndoField(Field):
    """Endomorphism ``T^a_b`` stored as matrix ``[a, b]``, jet shape ``(B, d, d)``."""

    kind = "endo"

    def __init__(self, fn, dim, loss=0, name="", complex_structure: bool = False):
        super().__init__(fn, dim, loss, name)
        self.complex_structure = complex_structure

    @classmethod
    def build(cls, fn, dim, deps: Sequence[Field] = (), extra: int = 0, name: str = "", complex_structure=False):
        return cls(fn, dim, _loss(deps) + extra, name, complex_structure)

    @classmethod
    def constant(cls, matrix: np.ndarray, name: str = "", complex_structure=False) -> EndoField:
        matrix = np.asarray(matrix, dtype=float)
        return cls(lambda c: c.const(matrix), matrix.shape[0], 0, name, complex_structure)


class MetricField(Field):
    """Symmetric bilinear form ``g_ab``, jet shape ``(B, d, d)``."""

    kind = "metric"

    @classmethod
    def build(cls, fn, dim, deps: Sequence[Field] = (), extra: int = 0, name: str = ""):
        return cls(fn, dim, _loss(deps) + extra, name)


class KForm(Field):
    """Differential k-form; components on strictly increasing index tuples, jet shape ``(B, C(d,k))``."""

    kind = "form"

    def __init__(self, fn, dim, degree: int, loss=0, name=""):
        super().__init__(fn, dim, loss, name)
        if not 0 <= degree <= dim:
            raise ValueError(f"degree {degree} outside 0..{dim}")
        self.degree = degree

    @classmethod
    def build(cls, fn, dim, degree, deps: Sequence[Field] = (), extra: int = 0, name: str = ""):
        return cls(fn, dim, degree, _loss(deps) + extra, name)

    def _combine(self, other, op) -> KForm:
        if isinstance(other, KForm):
            if other.degree != self.degree:
                raise ValueError("adding forms of different degree")
            a, b = self, other
            return KForm.build(lambda c: op(a(c), b(c)), self.dim, self.degree, (a, b))
        raise TypeError(f"cannot combine form with {type(other).__name__}")

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)

    def __neg__(self):
        a = self
        return KForm.build(lambda c: -a(c), self.dim, self.degree, (a,))

    def __mul__(self, other):
        a = self
        if isinstance(other, ScalarField):
            return KForm.build(lambda c: a(c) * other(c).expand(-1), self.dim, self.degree, (a, other))
        k = float(other)
        return KForm.build(lambda c: a(c) * k, self.dim, self.degree, (a,))

    __rmul__ = __mul__
