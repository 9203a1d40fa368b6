"""Shared domain types: vectors, comparison functions, Lyapunov certificates.

Norms are Euclidean for vectors and the induced 2-norm for matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionMismatch, NonHurwitz

_BISECT_XTOL = 1e-12


def as_vec(values, dim: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Return `values` as a read-only 1-D float array, checking size and finiteness."""
    v = np.array(values, dtype=float).reshape(-1)
    if dim is not None and v.size != dim:
        raise DimensionMismatch(f"{name}: expected dimension {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: non-finite entries {v}")
    v.flags.writeable = False
    return v


def induced_norm(M) -> float:
    return float(np.linalg.norm(np.atleast_2d(np.asarray(M, dtype=float)), 2))


def check_hurwitz(A) -> None:
    eig = np.linalg.eigvals(np.asarray(A, dtype=float))
    worst = eig[np.argmax(eig.real)]
    if worst.real >= 0:
        raise NonHurwitz(complex(worst) if worst.imag else float(worst.real))


class ComparisonFunction:
    """A class-K-infinity function with an inverse.

    Use one of the constructors: :meth:`power_law`, :meth:`tabulated` or
    :meth:`from_callable`. Instances are callable.
    """

    __slots__ = ("kind", "_f", "_finv", "params")

    def __init__(self, kind: str, f: Callable, finv: Callable, params: dict | None = None):
        self.kind = kind
        self._f = f
        self._finv = finv
        self.params = params or {}

    def __call__(self, s):
        return self._f(s)

    def evaluate(self, s):
        return self._f(s)

    def inverse(self, y):
        return self._finv(y)

    def __repr__(self):
        return f"ComparisonFunction({self.kind}, {self.params})"

    @classmethod
    def power_law(cls, a: float, p: float) -> "ComparisonFunction":
        if a <= 0 or p <= 0:
            raise ValueError("power law needs a > 0 and p > 0")
        a, p = float(a), float(p)
        return cls(
            "power-law",
            lambda s: a * s**p,
            lambda y: (y / a) ** (1.0 / p),
            {"a": a, "p": p},
        )

    @classmethod
    def tabulated(cls, s: Sequence[float], values: Sequence[float]) -> "ComparisonFunction":
        """Piecewise-linear interpolant through (s, values), extended linearly past the table."""
        s = np.asarray(s, dtype=float)
        y = np.asarray(values, dtype=float)
        if s[0] != 0 or y[0] != 0:
            raise ValueError("table must start at (0, 0)")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("table must be strictly increasing in both columns")
        slope = (y[-1] - y[-2]) / (s[-1] - s[-2])

        def f(x):
            x = np.asarray(x, dtype=float)
            out = np.where(x <= s[-1], np.interp(x, s, y), y[-1] + slope * (x - s[-1]))
            return float(out) if out.ndim == 0 else out

        def finv(v):
            v = np.asarray(v, dtype=float)
            out = np.where(v <= y[-1], np.interp(v, y, s), s[-1] + (v - y[-1]) / slope)
            return float(out) if out.ndim == 0 else out

        return cls("tabulated-monotone", f, finv, {"points": len(s)})

    @classmethod
    def from_callable(cls, fn: Callable[[float], float], inverse: Callable | None = None) -> "ComparisonFunction":
        """Wrap a user function; without `inverse`, invert by bracketed root finding."""
        if inverse is None:
            def inverse(y):
                y = float(y)
                if y <= 0:
                    return 0.0
                hi = 1.0
                while fn(hi) < y:
                    hi *= 2.0
                    if hi > 1e300:
                        raise ValueError("comparison function is bounded; cannot invert")
                lo = hi
                while fn(lo) > y and lo > 1e-300:
                    lo *= 0.5
                if fn(lo) == y:
                    return lo
                hi = 2.0 * lo
                # absolute 1e-12, tightened to relative for arguments below 1
                return brentq(lambda s: fn(s) - y, lo, hi,
                              xtol=_BISECT_XTOL * min(1.0, lo), rtol=4 * np.finfo(float).eps)
        return cls("user-supplied", fn, inverse)


class LyapunovCertificate:
    """A Lyapunov function for the tracking-error dynamics with its comparison bounds.

    `beta` bounds the gradient norm over the ball of radius R.
    """

    def __init__(self, value, gradient, alpha1, alpha2, alpha3, beta):
        self.value = value
        self.gradient = gradient
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.alpha3 = alpha3
        self.beta = beta

    def mu(self, R: float) -> float:
        """Radius of the smallest ball containing the sublevel set V <= alpha2(R)."""
        return float(self.alpha1.inverse(self.alpha2(R)))

    def threshold(self, s: float, sigma: float) -> float:
        """sigma * alpha3(s) / beta(s)."""
        return sigma * self.alpha3(s) / self.beta(s)


class QuadraticLyapunov(LyapunovCertificate):
    """V(x) = x' P x for a linear(ised) error system with decay matrix H.

    With ``absorb_input=True`` the input matrix B is folded into the gradient
    envelope, beta(s) = 2 ||P B|| s, and Lipschitz vectors bound the scalar
    control perturbation. Otherwise beta(s) = 2 ||P|| s, the plain gradient bound.
    """

    def __init__(self, P, H, B=None, absorb_input: bool = True):
        P = np.array(P, dtype=float)
        H = np.array(H, dtype=float)
        if not np.allclose(P, P.T, atol=1e-12 * max(1.0, np.abs(P).max())):
            raise ValueError("P must be symmetric")
        P = 0.5 * (P + P.T)
        eigP = np.linalg.eigvalsh(P)
        if eigP[0] <= 0:
            raise ValueError(f"P is not positive definite (min eigenvalue {eigP[0]})")
        eigH = np.linalg.eigvalsh(0.5 * (H + H.T))
        if eigH[0] <= 0:
            raise ValueError("H is not positive definite")
        self.P = P
        self.H = H
        self.P.flags.writeable = False
        self.lambda_min = float(eigP[0])
        self.lambda_max = float(eigP[-1])
        self.a = float(eigH[0])
        self.B = None if B is None else np.array(B, dtype=float).reshape(P.shape[0], -1)
        self.absorb_input = absorb_input and self.B is not None
        self.normPB = induced_norm(P @ self.B) if self.B is not None else float("nan")
        grad_gain = 2.0 * (self.normPB if self.absorb_input else self.lambda_max)
        self.grad_gain = grad_gain

        def value(x):
            return float(x @ P @ x)

        def gradient(x):
            return 2.0 * (P @ x)

        super().__init__(
            value=value,
            gradient=gradient,
            alpha1=ComparisonFunction.power_law(self.lambda_min, 2),
            alpha2=ComparisonFunction.power_law(self.lambda_max, 2),
            alpha3=ComparisonFunction.power_law(self.a, 2),
            beta=lambda s: grad_gain * s,
        )

    @classmethod
    def from_closed_loop(cls, Atilde, H, B=None, absorb_input: bool = True) -> "QuadraticLyapunov":
        return cls(solve_lyapunov_equation(Atilde, H), H, B=B, absorb_input=absorb_input)

    @property
    def condition(self) -> float:
        return self.lambda_max / self.lambda_min

    def mu(self, R: float) -> float:
        return float(R * np.sqrt(self.condition))

    def threshold(self, s: float, sigma: float) -> float:
        # sigma * a * s**2 / (grad_gain * s), simplified so that s = 0 is well defined
        return sigma * self.a * s / self.grad_gain


@dataclass(frozen=True)
class LevelSetSpec:
    """The set S(R) = {xi : V(x_tilde) <= alpha2(R), ||[x_d; v]|| <= d}."""

    R: float
    d: float

    def contains(self, cert: LyapunovCertificate, x_tilde, ref_part, rtol: float = 0.0) -> bool:
        level = cert.alpha2(self.R) * (1.0 + rtol)
        return bool(cert.value(np.asarray(x_tilde)) <= level
                    and np.linalg.norm(ref_part) <= self.d * (1.0 + rtol))

    def x_tilde_radius(self, cert: LyapunovCertificate) -> float:
        """Radius of a ball in x_tilde containing the V-sublevel part of S(R)."""
        return cert.mu(self.R)


def solve_lyapunov_equation(Atilde, H) -> np.ndarray:
    """Solve P A + A' P = -H for symmetric positive-definite P.

    Direct Kronecker-form linear solve, intended for small n.
    """
    A = np.atleast_2d(np.asarray(Atilde, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or H.shape != (n, n):
        raise DimensionMismatch(f"A {A.shape} and H {H.shape} must be square and equal")
    if not np.allclose(H, H.T):
        raise ValueError("H must be symmetric")
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise ValueError("H must be positive definite")
    check_hurwitz(A)
    eye = np.eye(n)
    # column-major vec: vec(P A) = (A' kron I) vec(P), vec(A' P) = (I kron A') vec(P)
    lhs = np.kron(A.T, eye) + np.kron(eye, A.T)
    p = np.linalg.solve(lhs, -H.reshape(-1, order="F"))
    P = p.reshape(n, n, order="F")
    return 0.5 * (P + P.T)


def ultimate_bound(r: float, alpha1: ComparisonFunction, alpha2: ComparisonFunction) -> float:
    """alpha1^-1(alpha2(r)): radius of the ball the tracking error settles into."""
    if not r > 0:
        raise ValueError("r must be positive")
    return float(alpha1.inverse(alpha2(r)))


def radius_for_ultimate_bound(r1: float, alpha1: ComparisonFunction, alpha2: ComparisonFunction) -> float:
    """Invert ultimate_bound by bisection: the r with alpha1^-1(alpha2(r)) = r1."""
    if not r1 > 0:
        raise ValueError("target ultimate bound must be positive")
    g = lambda r: ultimate_bound(r, alpha1, alpha2) - r1
    lo, hi = r1 * 1e-12, r1
    if g(hi) < 0:
        raise ValueError("ultimate bound below r; certificate has alpha1 > alpha2")
    while g(lo) > 0:
        lo *= 1e-3
        if lo < 1e-300:
            raise ValueError("cannot bracket r for the requested ultimate bound")
    return float(brentq(g, lo, hi, xtol=_BISECT_XTOL * r1, rtol=4 * np.finfo(float).eps))
