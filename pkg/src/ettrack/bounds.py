"""Closed-form guarantees: Delta, ultimate bound, minimum inter-execution times."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import LevelSetSpec, LyapunovCertificate, ultimate_bound
from .errors import InvalidInterval
from .systems import LipschitzConstants, LipschitzVectorProvider, estimate_lipschitz_constants

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FULL_SCAN_LIMIT = 1_000_000


def delta_bound(s1: float, s2: float, sigma: float, alpha3: Callable, beta: Callable,
                grid: int = 1024, tol: float = 1e-12) -> float:
    """min over s in [s1, s2] of sigma alpha3(s) / beta(s).

    Coarse grid search, then golden-section refinement around the best grid point.
    """
    if not (0 < s1 <= s2) or not math.isfinite(s2):
        raise InvalidInterval(f"need 0 < s1 <= s2 < inf, got [{s1}, {s2}]")
    ratio = lambda s: sigma * alpha3(s) / beta(s)
    if s1 == s2:
        return float(ratio(s1))
    ss = np.linspace(s1, s2, grid)
    vals = np.array([ratio(s) for s in ss])
    i = int(np.argmin(vals))
    a, b = ss[max(i - 1, 0)], ss[min(i + 1, grid - 1)]
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = ratio(c), ratio(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = ratio(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = ratio(d)
    return float(min(vals[i], fc, fd, ratio(a), ratio(b)))


@dataclass(frozen=True)
class BoundInputs:
    sigma: float
    r: float
    R0: float
    mu0: float
    delta: float
    r1: float
    d: float
    P1: float
    P2: float
    P3: float
    L0_norm: float
    Q0_norm: float
    M0_norm: float
    c: Optional[float] = None
    d_v: Optional[float] = None
    T_v: Optional[float] = None
    J_v: Optional[float] = None

    def __post_init__(self):
        for name in ("sigma", "r", "R0", "mu0", "delta", "d", "P1", "P2", "P3", "L0_norm", "Q0_norm", "M0_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.mu0 < self.r * (1 - 1e-12):
            raise ValueError(f"mu0={self.mu0} must be at least r={self.r}")

    @property
    def P0(self) -> float:
        return self.P1 * self.mu0 + (self.P2 + self.P3) * self.d


@dataclass(frozen=True)
class BoundReport:
    theorem_id: int
    delta: float
    r1: float
    T_lower: Optional[float]
    feasible: bool
    infeasibility_reason: str = ""
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem_id,
            "delta": self.delta,
            "r1": self.r1,
            "T_lower": self.T_lower,
            "feasible": self.feasible,
            "infeasibility_reason": self.infeasibility_reason,
            **self.details,
        }


def make_bound_inputs(cert: LyapunovCertificate, provider: LipschitzVectorProvider, sigma: float, r: float,
                      R0: float, d: float, constants: LipschitzConstants, c=None, d_v=None, T_v=None,
                      J_v=None) -> BoundInputs:
    """Assemble inputs; R0 is ||x_tilde(t0)|| for Theorem 1 and the initial-error bound otherwise."""
    mu0 = cert.mu(R0)
    L0 = provider(R0)
    return BoundInputs(
        sigma=sigma, r=r, R0=R0, mu0=mu0,
        delta=delta_bound(r, mu0, sigma, cert.alpha3, cert.beta),
        r1=ultimate_bound(r, cert.alpha1, cert.alpha2),
        d=d, P1=constants.P1, P2=constants.P2, P3=constants.P3,
        L0_norm=float(np.linalg.norm(L0)),
        Q0_norm=float(np.linalg.norm(L0[: provider.split])),
        M0_norm=float(np.linalg.norm(L0[provider.split:])),
        c=c, d_v=d_v, T_v=T_v, J_v=J_v,
    )


def _growth_time(rate: float, target: float, offset: float) -> float:
    """Time for ||e|| obeying d||e||/dt <= rate ||e|| + offset to grow from 0 to target."""
    if offset <= 0:
        return math.inf
    return math.log1p(target / offset) / rate


def theorem1_bound(inputs: BoundInputs) -> BoundReport:
    c = inputs.c or 0.0
    T = _growth_time(inputs.L0_norm, inputs.delta, inputs.P0 + c)
    return BoundReport(1, inputs.delta, inputs.r1, T, True,
                       details={"P0": inputs.P0, "mu0": inputs.mu0, "L0_norm": inputs.L0_norm, "c": c})


def theorem2_bound(inputs: BoundInputs) -> BoundReport:
    """Bound under a plain uniform bound d_v on ||v||.

    Reports both the printed numerator Delta - 2 d_v and the one implied by
    the derivation, Delta - 2 d_v ||M(R0)||. Feasibility uses the latter.
    """
    if inputs.d_v is None:
        return BoundReport(2, inputs.delta, inputs.r1, None, False, "d_v (bound on ||v||) not given")
    dv, M = inputs.d_v, inputs.M0_norm
    margin = inputs.delta - 2.0 * dv * M
    printed_num = inputs.delta - 2.0 * dv
    offset = inputs.P0 + 2.0 * dv * M
    details = {"P0": inputs.P0, "mu0": inputs.mu0, "margin": margin, "numerator_printed": printed_num,
               "Q0_norm": inputs.Q0_norm, "M0_norm": M}
    if not margin > 0:
        return BoundReport(2, inputs.delta, inputs.r1, None, False,
                           f"Delta - 2 d_v ||M(R0)|| = {margin:.6g} <= 0", details)
    T_margin = _growth_time(inputs.Q0_norm, margin, offset)
    details["T_lower_margin_numerator"] = T_margin
    if printed_num > 0:
        T = _growth_time(inputs.Q0_norm, printed_num, offset)
    else:
        # printed numerator not positive while the margin is (||M(R0)|| < 1)
        T = T_margin
        details["note"] = "printed numerator <= 0; T_lower uses the margin numerator"
    details["T_lower_printed"] = T if printed_num > 0 else None
    return BoundReport(2, inputs.delta, inputs.r1, T, True, details=details)


def theorem3_bound(inputs: BoundInputs) -> BoundReport:
    """max over k = 1..N of min(k T_v, T_k) with N = floor(Delta / (J_v ||M(R0)||))."""
    if inputs.T_v is None or inputs.J_v is None:
        return BoundReport(3, inputs.delta, inputs.r1, None, False, "jump metadata (T_v, J_v) not given")
    c = inputs.c or 0.0
    M, Jv, Tv = inputs.M0_norm, inputs.J_v, inputs.T_v
    jump = Jv * M
    details = {"P0": inputs.P0, "mu0": inputs.mu0, "L0_norm": inputs.L0_norm, "M0_norm": M, "c": c,
               "T_v": Tv, "J_v": Jv}
    if jump == 0:
        base = theorem1_bound(inputs)
        details.update(N=None, k_star=None, note="jump-free: reduces to the Theorem 1 bound")
        return BoundReport(3, inputs.delta, inputs.r1, base.T_lower, True, details=details)
    margin = inputs.delta - jump
    details["margin"] = margin
    if not margin > 0:
        return BoundReport(3, inputs.delta, inputs.r1, None, False,
                           f"Delta - J_v ||M(R0)|| = {margin:.6g} <= 0", details)
    if not Tv > 0:
        return BoundReport(3, inputs.delta, inputs.r1, None, False, "dwell time T_v must be positive", details)
    N = int(math.floor(inputs.delta / jump))
    offset = inputs.P0 + c

    def T_k(k):
        return np.log1p((inputs.delta - k * jump) / offset) / inputs.L0_norm if offset > 0 else \
            np.where(inputs.delta - k * jump > 0, np.inf, 0.0)

    if N <= _FULL_SCAN_LIMIT:
        ks = np.arange(1, N + 1)
        vals = np.minimum(ks * Tv, T_k(ks))
        j = int(np.argmax(vals))
        k_star, T = int(ks[j]), float(vals[j])
    else:
        # k T_v increases and T_k decreases: the maximum of the minimum sits at their crossing
        lo, hi = 1, N
        while lo < hi:
            mid = (lo + hi) // 2
            if mid * Tv >= T_k(mid):
                hi = mid
            else:
                lo = mid + 1
        cands = [k for k in (lo - 1, lo) if 1 <= k <= N]
        vals = [min(k * Tv, float(T_k(k))) for k in cands]
        j = int(np.argmax(vals))
        k_star, T = cands[j], vals[j]
    details.update(N=N, k_star=k_star)
    return BoundReport(3, inputs.delta, inputs.r1, T, True, details=details)


def min_feasible_r(cert: LyapunovCertificate, sigma: float, mu0: float, jump_term: float,
                   tol: float = 1e-12) -> float:
    """Smallest r with Delta_r^mu0 > jump_term, by bisection on (0, mu0].

    jump_term is J_v ||M(R0)|| for Theorem 3 or 2 d_v ||M(R0)|| for Theorem 2.
    """
    h = lambda r: delta_bound(r, mu0, sigma, cert.alpha3, cert.beta) - jump_term
    if h(mu0) <= 0:
        raise ValueError("no r in (0, mu0] satisfies the feasibility condition")
    lo, hi = 0.0, mu0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid > 0 and h(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def scenario_constants(scenario, R: float) -> LipschitzConstants:
    if scenario.lipschitz_override is not None:
        return scenario.lipschitz_override
    return estimate_lipschitz_constants(scenario.model, LevelSetSpec(R, scenario.reference.d), scenario.cert,
                                        samples=scenario.lipschitz_samples, seed=scenario.lipschitz_seed)


def feasibility_report(scenario, constants: Optional[LipschitzConstants] = None) -> List[BoundReport]:
    """Reports for the theorem matching the reference's assumption set.

    A4 metadata (derivative bound) selects Theorem 1, A5 (jumps with dwell)
    Theorem 3, and a bare uniform bound Theorem 2.
    """
    ref, params, cert = scenario.reference, scenario.params, scenario.cert
    x_tilde0 = float(np.linalg.norm(np.asarray(scenario.x0) - np.asarray(ref.x_d0)))
    # ||x_tilde(t0)|| = ||x_tilde(0)|| unless the error starts inside the r-ball (then it equals r)
    norm_t0 = max(x_tilde0, params.r)
    R0 = scenario.R0 if scenario.R0 is not None else norm_t0
    kind = ref.assumption_set
    R = norm_t0 if kind == "A4" else R0
    consts = constants or scenario_constants(scenario, R)
    inputs = make_bound_inputs(cert, scenario.provider, params.sigma, params.r, R, ref.d, consts,
                               c=ref.c, d_v=ref.d_v, T_v=ref.dwell, J_v=ref.jump)
    if kind == "A4":
        reports = [theorem1_bound(inputs)]
    elif kind == "A5":
        reports = [theorem3_bound(inputs)]
    else:
        reports = [theorem2_bound(inputs)]
    for rep in reports:
        rep.details.update(P1=consts.P1, P2=consts.P2, P3=consts.P3, R0=R, assumption_set=kind)
    return reports
