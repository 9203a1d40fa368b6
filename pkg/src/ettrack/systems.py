"""Plant, reference and controller models, and the nonlinear-spring benchmark."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import LevelSetSpec, LyapunovCertificate, as_vec, check_hurwitz
from .errors import DimensionMismatch, RegionUnbounded

SPRING_A = np.array([[0.0, 1.0], [0.0, -1.0]])
SPRING_B = np.array([[0.0], [1.0]])


@dataclass(frozen=True)
class SystemModel:
    """Plant dx/dt = f(x, u), reference dx_d/dt = f_r(x_d, v), controller u = gamma(xi).

    xi is the stacked vector [x_tilde; x_d; v] of length 2n + q.
    """

    n: int
    m: int
    q: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f_r: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        zx, zv = np.zeros(self.n), np.zeros(self.q)
        u0 = np.asarray(self.gamma(np.zeros(2 * self.n + self.q)), dtype=float).reshape(-1)
        if u0.size != self.m:
            raise DimensionMismatch(f"gamma returns {u0.size} entries, expected m={self.m}")
        fx = np.asarray(self.f(zx, u0), dtype=float).reshape(-1)
        fr = np.asarray(self.f_r(zx, zv), dtype=float).reshape(-1)
        if fx.size != self.n or fr.size != self.n:
            raise DimensionMismatch(f"f/f_r return {fx.size}/{fr.size} entries, expected n={self.n}")
        gap = float(np.max(np.abs(fx - fr)))
        if gap > 1e-12:
            raise ValueError(f"f(0, gamma(0)) - f_r(0, 0) = {fx - fr}; the origin must be an equilibrium of the error system")

    @property
    def xi_dim(self) -> int:
        return 2 * self.n + self.q

    def split_xi(self, xi):
        n = self.n
        return xi[:n], xi[n:2 * n], xi[2 * n:]

    def error_rate(self, x_tilde, x_d, v, u=None):
        """d(x_tilde)/dt with control u (continuous control gamma(xi) when u is None)."""
        if u is None:
            u = self.gamma(np.concatenate([x_tilde, x_d, v]))
        return np.asarray(self.f(x_tilde + x_d, u)) - np.asarray(self.f_r(x_d, v))


@dataclass(frozen=True)
class LipschitzVectorProvider:
    """R -> L(R), a positive Lipschitz vector for the control perturbation on S(R).

    The first `split` entries form Q (state-like components), the rest M (v components).
    """

    fn: Callable[[float], np.ndarray]
    split: int

    def __call__(self, R: float) -> np.ndarray:
        L = np.asarray(self.fn(R), dtype=float)
        if np.any(L <= 0):
            raise ValueError(f"Lipschitz vector must be strictly positive, got {L}")
        return L

    def Q(self, R: float) -> np.ndarray:
        return self(R)[: self.split]

    def M(self, R: float) -> np.ndarray:
        return self(R)[self.split:]


@dataclass(frozen=True)
class ReferenceSignal:
    """Exogenous input v and reference initial state, plus its boundedness metadata.

    kind is "ode" (v integrated from v_dot), "analytic" (v_of_t closed form) or
    "quantized" (v_of_t piecewise constant). `c` is the bound on ||dv/dt|| (or the
    between-jump Lipschitz constant when `jump` is set), `dwell`/`jump` are the
    minimum separation and maximum size of jumps, `d_v` bounds ||v||.
    """

    kind: str
    x_d0: np.ndarray
    v0: np.ndarray
    d: float
    d1: float
    v_dot: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    v_of_t: Optional[Callable[[float], np.ndarray]] = None
    c: Optional[float] = None
    dwell: Optional[float] = None
    jump: Optional[float] = None
    d_v: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.kind not in ("ode", "analytic", "quantized"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.kind == "ode" and self.v_dot is None:
            raise ValueError("ode-driven reference needs v_dot")
        if self.kind != "ode" and self.v_of_t is None:
            raise ValueError(f"{self.kind} reference needs v_of_t")

    @property
    def integrated(self) -> bool:
        return self.kind == "ode"

    @property
    def assumption_set(self) -> str:
        """'A5' if jump metadata is present, 'A4' if only a derivative bound, else 'A3'."""
        if self.jump is not None and self.dwell is not None:
            return "A5"
        if self.c is not None:
            return "A4"
        return "A3"


class LipschitzConstants(NamedTuple):
    P1: float
    P2: float
    P3: float


def nonlinear_spring_model(K) -> SystemModel:
    """dx/dt = A x + [0; -x1^3] + B u tracking a double-integrator reference.

    gamma(xi) = K x_tilde + v + (x_tilde1 + x_d1)^3 + x_d2 cancels the cubic and
    feedforward terms, leaving d(x_tilde)/dt = (A + B K) x_tilde under continuous control.
    """
    K = as_vec(K, 2, "K")
    Atilde = SPRING_A + SPRING_B @ K.reshape(1, 2)
    check_hurwitz(Atilde)
    k1, k2 = float(K[0]), float(K[1])

    def f(x, u):
        x1, x2 = x[0], x[1]
        return np.array([x2, -x2 - x1 * x1 * x1 + u[0]])

    def f_r(xd, v):
        return np.array([xd[1], v[0]])

    def gamma(xi):
        p = xi[0] + xi[2]
        return np.array([k1 * xi[0] + k2 * xi[1] + xi[4] + p * p * p + xi[3]])

    return SystemModel(n=2, m=1, q=1, f=f, f_r=f_r, gamma=gamma, name="nonlinear-spring",
                       meta={"A": SPRING_A, "B": SPRING_B, "K": K, "Atilde": Atilde})


def spring_lipschitz_provider(K, d1: float, certificate: LyapunovCertificate) -> LipschitzVectorProvider:
    """L(R) = [3(mu+d1)^2 + |k1|; |k2|; 3(mu+d1)^2; 1; 1] with mu = alpha1^-1(alpha2(R)).

    When the certificate keeps B out of its gradient envelope, L is scaled by ||B|| (= 1 here).
    """
    if d1 < 0:
        raise ValueError("d1 must be nonnegative")
    K = as_vec(K, 2, "K")
    k1, k2 = abs(float(K[0])), abs(float(K[1]))
    scale = 1.0 if getattr(certificate, "absorb_input", True) else float(np.linalg.norm(SPRING_B, 2))

    def L(R):
        mu = certificate.mu(R)
        cube = 3.0 * (mu + d1) ** 2
        return scale * np.array([cube + k1, k2, cube, 1.0, 1.0])

    return LipschitzVectorProvider(L, split=4)


def quantize(value: float, step: float, slope: float, prev: Optional[float] = None) -> float:
    """Nearest multiple of `step`; exact half-way ties go up on rising slope, down on falling.

    On a tie with zero slope the previous value is kept when given, else the lower level.
    """
    k = value / step
    lo = math.floor(k)
    frac = k - lo
    if abs(frac - 0.5) < 1e-9:
        if slope > 0:
            n = lo + 1
        elif slope < 0 or prev is None:
            n = lo
        else:
            return prev
    else:
        n = lo + 1 if frac > 0.5 else lo
    return round(n * step, 12) + 0.0


def case1_reference(d: float = 2.5, d1: float = 2.5) -> ReferenceSignal:
    """Sinusoidal reference: x_d(0) = [pi/3; 1], v(0) = 0, dv/dt = -cos t (so v = -sin t)."""
    return ReferenceSignal(
        kind="ode",
        x_d0=as_vec([math.pi / 3, 1.0]),
        v0=as_vec([0.0]),
        d=d,
        d1=d1,
        v_dot=lambda t, v: np.array([-math.cos(t)]),
        c=1.0,
        d_v=1.0,
        name="case1",
    )


CASE2_STEP = 0.1
# -sin t crosses +-0.05 at pi -+ asin(0.05): the closest pair of level crossings
CASE2_DWELL = 2.0 * math.asin(0.05)


def case2_v(t: float) -> np.ndarray:
    return np.array([quantize(-math.sin(t), CASE2_STEP, -math.cos(t))])


def case2_reference(d: float = 2.5, d1: float = 2.5) -> ReferenceSignal:
    """-sin t quantized to multiples of 0.1; x_d(0) = [1; 1.003]."""
    return ReferenceSignal(
        kind="quantized",
        x_d0=as_vec([1.0, 1.003]),
        v0=as_vec([0.0]),
        d=d,
        d1=d1,
        v_of_t=case2_v,
        c=0.0,
        dwell=CASE2_DWELL,
        jump=CASE2_STEP,
        d_v=1.0,
        name="case2",
    )


def _uniform_ball(rng, count, dim, radius):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random((count, 1)) ** (1.0 / dim))


def estimate_lipschitz_constants(model: SystemModel, region: LevelSetSpec, cert: LyapunovCertificate,
                                 samples: int = 100_000, seed: int = 0,
                                 safety: float = 1.1) -> LipschitzConstants:
    """Sampled constants with ||F(x_tilde, w)|| <= P1 ||x_tilde|| + P2 ||w|| and ||f_r|| <= P3 d.

    F is the continuous-control error rate and w = [x_d; v]. x_tilde is drawn from the
    ball of radius mu(R) containing S(R), w from the ball of radius d. P1 is the largest
    ratio ||F(x_tilde, w) - F(0, w)|| / ||x_tilde||, P2 the largest ||F(0, w)|| / ||w||;
    each is inflated by `safety`.
    """
    if not (np.isfinite(region.R) and np.isfinite(region.d)):
        raise RegionUnbounded(f"region R={region.R}, d={region.d} must be finite")
    n, q = model.n, model.q
    rng = np.random.default_rng(seed)
    mu = cert.mu(region.R)
    xts = _uniform_ball(rng, samples, n, mu)
    ws = _uniform_ball(rng, samples, n + q, region.d)
    p1 = p2 = p3 = 0.0
    for xt, w in zip(xts, ws):
        xd, v = w[:n], w[n:]
        F0 = model.error_rate(np.zeros(n), xd, v)
        F = model.error_rate(xt, xd, v)
        nx, nw = np.linalg.norm(xt), np.linalg.norm(w)
        if nx > 0:
            p1 = max(p1, np.linalg.norm(F - F0) / nx)
        if nw > 0:
            p2 = max(p2, np.linalg.norm(F0) / nw)
        p3 = max(p3, np.linalg.norm(model.f_r(xd, v)))
    p3 = p3 / region.d if region.d > 0 else 0.0
    return LipschitzConstants(safety * p1, safety * p2, safety * p3)
