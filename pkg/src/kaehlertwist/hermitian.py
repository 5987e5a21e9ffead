"""Hermitian metrics compatible with the deformed complex structure I, and the balanced condition."""

from __future__ import annotations

import ast
import operator
import re
from collections.abc import Callable
from math import factorial

import numpy as np

from . import jets as jt
from .checks import CheckReport, pointwise_max, record
from .fields import KForm, ScalarField
from .foliation import Foliation, build_I
from .forms import exterior_derivative, full, wedge
from .jets import Jet
from .weinstein import WeinsteinStructure

__all__ = [
    "Z_INV",
    "HermitianPositivityError",
    "PhiProfile",
    "Profile",
    "abc_geometric_pair",
    "abc_ode_residual",
    "affine",
    "balanced_residual",
    "conformal_balanced",
    "conformal_exponent",
    "conformal_form",
    "hermitian_form",
    "omega_phi",
    "parse_profile",
    "positivity_margin",
    "solution_family",
]


class HermitianPositivityError(ValueError):
    pass


def _as_jet(v, like):
    if isinstance(v, Jet) or not isinstance(like, Jet):
        return v
    return jt.constant(np.broadcast_to(np.asarray(v, float), like.shape), like)


class Profile:
    """Smooth function of one real variable acting on floats, arrays and jets."""

    def __init__(self, fn: Callable, name: str):
        self.fn = fn
        self.name = name

    def __call__(self, x):
        return _as_jet(self.fn(x), x)

    def __repr__(self) -> str:
        return f"Profile({self.name})"

    def derivative(self, k: int = 1) -> Profile:
        """Exact k-th derivative through univariate Taylor expansion."""
        if k == 0:
            return self
        base = self

        def fn(x):
            if isinstance(x, Jet):
                order = x.order + k
                t = jt.variables(x.value.reshape(-1, 1), order)[:, 0]
                coeffs = _as_jet(base.fn(t), t).c.reshape(x.shape + (order + 1,))
                return jt.compose(x, [coeffs[..., k + i] * factorial(k + i) for i in range(x.order + 1)])
            arr = np.asarray(x, float)
            t = jt.variables(arr.reshape(-1, 1), k)[:, 0]
            return _as_jet(base.fn(t), t).c[:, k].reshape(arr.shape) * factorial(k)

        return Profile(fn, f"d{k}({self.name})")

    def of(self, z: ScalarField) -> ScalarField:
        return z.map(self, self.name)


class PhiProfile(Profile):
    """Positive decreasing profile ``phi``."""

    def validate(self, zvals: np.ndarray) -> None:
        zvals = np.asarray(zvals, float)
        v, dv = self(zvals), self.derivative(1)(zvals)
        if np.any(v <= 0):
            k = int(np.argmin(v))
            raise ValueError(f"profile {self.name} not positive at z = {zvals[k]:.6g}")
        if np.any(dv >= 0):
            k = int(np.argmax(dv))
            raise ValueError(f"profile {self.name} not decreasing at z = {zvals[k]:.6g} (phi' = {dv[k]:.3e})")


# -- expression grammar ------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_FUNCS = {"exp": jt.exp, "log": jt.log}


def _pow(a, b):
    if isinstance(b, (int, float)):
        return jt.power(a, b)
    return jt.exp(b * jt.log(a))


def _compile(node):
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        v = float(node.value)
        return lambda z: v
    if isinstance(node, ast.Name) and node.id == "z":
        return lambda z: z
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        f = _compile(node.operand)
        return (lambda z: -f(z)) if isinstance(node.op, ast.USub) else f
    if isinstance(node, ast.BinOp):
        lf, rf = _compile(node.left), _compile(node.right)
        if isinstance(node.op, ast.Pow):
            return lambda z: _pow(lf(z), rf(z))
        op = _BINOPS.get(type(node.op))
        if op is not None:
            return lambda z: op(lf(z), rf(z))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        args = [_compile(a) for a in node.args]
        if name in _FUNCS and len(args) == 1:
            fn = _FUNCS[name]
            return lambda z: fn(args[0](z))
        if name == "pow" and len(args) == 2:
            return lambda z: _pow(args[0](z), args[1](z))
    raise ValueError(f"unsupported expression element: {ast.dump(node)[:60]}")


def parse_profile(text: str) -> PhiProfile:
    """``Z_INV``, ``AFFINE(a, b)`` (``a + b z``) or an expression in ``z`` using + - * / ** pow exp log."""
    src = text.strip().replace("×", "*").replace("÷", "/").replace("−", "-").replace("^", "**")
    if src.upper() == "Z_INV":
        return Z_INV
    m = re.fullmatch(r"AFFINE\(\s*([^,]+),\s*([^)]+)\)", src, flags=re.IGNORECASE)
    if m:
        return affine(float(m.group(1)), float(m.group(2)))
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse profile {text!r}: {exc.msg}") from None
    return PhiProfile(_compile(tree), src)


Z_INV = PhiProfile(lambda z: 1.0 / z, "Z_INV")


def affine(a: float, b: float) -> PhiProfile:
    return PhiProfile(lambda z: a + b * z, f"AFFINE({a:g},{b:g})")


# -- forms -------------------------------------------------------------------

def hermitian_form(ws: WeinsteinStructure, A: Profile, B: Profile) -> KForm:
    """``-A(z) omega_+ + B(z) omega_-`` for the canonical splitting."""
    fol = Foliation(ws.pkg, ws.split)
    return fol.omega_minus * B.of(ws.z) - fol.omega_plus * A.of(ws.z)


def positivity_margin(ws: WeinsteinStructure, form: KForm, points) -> np.ndarray:
    """Smallest eigenvalue of the symmetric part of ``form(., I.)`` per sample."""
    pts = np.atleast_2d(points)
    h = np.einsum("Bac,Bcb->Bab", full(form, pts), build_I(ws.J, ws.split).values(pts))
    return np.linalg.eigvalsh(0.5 * (h + np.swapaxes(h, 1, 2))).min(axis=1)


def _check_positive(ws: WeinsteinStructure, form: KForm, points) -> None:
    pts = np.atleast_2d(points)
    ev = positivity_margin(ws, form, pts)
    if np.any(ev <= 0):
        k = int(np.argmin(ev))
        raise HermitianPositivityError(f"form(., I.) not positive at {pts[k].tolist()} (eigenvalue {ev[k]:.3e})")


def omega_phi(ws: WeinsteinStructure, phi: PhiProfile, points=None) -> KForm:
    """``phi'(z) omega_+ + phi(z)/z omega_-``; positive for I when phi > 0 and phi' < 0."""
    pts = ws.sample(64, 0) if points is None else np.atleast_2d(points)
    phi.validate(ws.z.values(pts))
    dphi = phi.derivative(1)
    A = Profile(lambda t: -dphi(t), f"-{dphi.name}")
    B = Profile(lambda t: phi(t) / t, f"{phi.name}/z")
    form = hermitian_form(ws, A, B)
    _check_positive(ws, form, pts)
    return form


def _power_form(omega: KForm, k: int) -> KForm:
    out = omega
    for _ in range(k - 1):
        out = wedge(out, omega)
    return out


def balanced_residual(Omega: KForm, points) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise ``|d(Omega^{d/2 - 1})|`` and ``|d Omega|``."""
    pts = np.atleast_2d(points)
    k = Omega.dim // 2
    r2 = pointwise_max(exterior_derivative(Omega).values(pts))
    if k == 1:
        return np.zeros(len(pts)), r2
    r1 = pointwise_max(exterior_derivative(_power_form(Omega, k - 1)).values(pts))
    return r1, r2


def conformal_exponent(m: int, n: int) -> float:
    return -2.0 * m / (m + n - 1)


def conformal_form(ws: WeinsteinStructure) -> KForm:
    """Fundamental form of ``(z^e g, I)``, ``e = -2m/(m+n-1)``, i.e. ``z^e (omega_- - omega_+)``."""
    e = conformal_exponent(ws.m, ws.n)
    fac = Profile(lambda t: jt.power(t, e), f"z^{e:g}")
    return hermitian_form(ws, fac, fac)


def conformal_balanced(ws: WeinsteinStructure, points, tol_balanced: float = 1e-7, tol_kaehler: float = 1e-8,
                       kaehler_floor: float = 1e-3, riemannian_tol: float = 1e-10) -> CheckReport:
    pts = np.atleast_2d(points)
    r1, r2 = balanced_residual(conformal_form(ws), pts)
    theta = pointwise_max(ws.theta.values(pts))
    rep = CheckReport(metadata={"exponent": conformal_exponent(ws.m, ws.n), "n": ws.n, "m": ws.m})
    rep.add(record("hermitian.balanced", "d(Omega^{d-1}) = 0", r1, tol_balanced, pts))
    if ws.n >= 2 and np.max(theta) > riemannian_tol:
        rep.add(record("hermitian.non_kaehler", "d Omega != 0 (n >= 2)", r2, kaehler_floor, pts, comparator=">="))
    else:
        rep.add(record("hermitian.kaehler", "d Omega = 0", r2, tol_kaehler, pts))
    return rep


# -- scalar ODE ----------------------------------------------------------------

def solution_family(phi: PhiProfile, m: int, n: int) -> tuple[Profile, Profile]:
    """``A^{(m+n-1)/m} = -phi'`` and ``B = A^{-(n-1)/m} phi / z``."""
    dphi = phi.derivative(1)
    pa = m / (m + n - 1)
    A = Profile(lambda t: jt.power(-dphi(t), pa), f"A[{phi.name}]")
    B = Profile(lambda t: phi(t) / t * jt.power(A(t), -(n - 1) / m), f"B[{phi.name}]")
    return A, B


def abc_ode_residual(m: int, n: int, A: Profile, B: Profile, zvals) -> np.ndarray:
    """``|m A B' + (n-1) B A' + m A (A + B) / z|``."""
    z = np.asarray(zvals, float)
    a, b = A(z), B(z)
    da, db = A.derivative(1)(z), B.derivative(1)(z)
    return np.abs(m * a * db + (n - 1) * b * da + m * a * (a + b) / z)


def abc_geometric_pair(ws: WeinsteinStructure, A: Profile, B: Profile, points, tol_ode: float = 1e-10,
                       tol_balanced: float = 1e-7) -> CheckReport:
    """The scalar balanced ODE and the geometric balanced defect of ``-A omega_+ + B omega_-``."""
    pts = np.atleast_2d(points)
    ode = abc_ode_residual(ws.m, ws.n, A, B, ws.z.values(pts))
    r1, _ = balanced_residual(hermitian_form(ws, A, B), pts)
    rode = record("hermitian.abc_ode", "m A B' + (n-1) B A' + m A (A+B)/z = 0", ode, tol_ode, pts)
    rgeo = record("hermitian.abc_balanced", "d(alpha^{d-1}) = 0 for alpha = -A omega_+ + B omega_-", r1, tol_balanced, pts)
    return CheckReport(metadata={"ode_geometric_agree": rode.passed == rgeo.passed}).add(rode, rgeo)
