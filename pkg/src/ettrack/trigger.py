"""Event-triggering law, held-signal state and the non-increasing Lipschitz ledger."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import LyapunovCertificate
from .errors import DimensionMismatch, ThresholdUndefined
from .systems import LipschitzVectorProvider, SystemModel


@dataclass(frozen=True)
class TriggerParams:
    sigma: float = 0.95
    r: float = 0.0154

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")


@dataclass(frozen=True)
class TriggerState:
    """Held sample xi(t_i), the control computed from it, and the current L_i.

    Before the first (arming) event the held control is zero.
    """

    held_xi: np.ndarray
    held_u: np.ndarray
    L_current: Optional[np.ndarray] = None
    event_index: int = -1
    armed: bool = False

    @classmethod
    def initial(cls, model: SystemModel) -> "TriggerState":
        return cls(held_xi=np.zeros(model.xi_dim), held_u=np.zeros(model.m))


def measurement_error(held_xi, xi_now) -> np.ndarray:
    """e = xi(t_i) - xi."""
    held_xi = np.asarray(held_xi, dtype=float)
    xi_now = np.asarray(xi_now, dtype=float)
    if held_xi.shape != xi_now.shape:
        raise DimensionMismatch(f"held {held_xi.shape} vs current {xi_now.shape}")
    return held_xi - xi_now


def trigger_function(e, x_tilde, L, params: TriggerParams, cert: LyapunovCertificate) -> float:
    """g = L'|e| - sigma alpha3(||x_tilde||) / beta(||x_tilde||).

    An event is due when g >= 0 and ||x_tilde|| >= r. Inside the r-ball the
    threshold is still reported; it is taken as 0 where beta vanishes.
    """
    s = float(np.linalg.norm(x_tilde))
    lte = float(np.dot(L, np.abs(e)))
    return lte - _threshold(s, params, cert)


def _threshold(s: float, params: TriggerParams, cert: LyapunovCertificate) -> float:
    b = cert.beta(s)
    if b > 0:
        return params.sigma * cert.alpha3(s) / b
    if s >= params.r:
        raise ThresholdUndefined(f"beta({s}) = 0 outside the r-ball")
    return 0.0


def should_fire(g: float, norm_x_tilde: float, params: TriggerParams) -> bool:
    return g >= 0.0 and norm_x_tilde >= params.r


def weight_vector(L, params: TriggerParams, cert) -> np.ndarray:
    """W_i = 2 ||PB|| L_i / (sigma a) for a quadratic certificate: fire when W'|e| >= ||x_tilde||."""
    return cert.grad_gain * np.asarray(L, dtype=float) / (params.sigma * cert.a)


def update_L_ledger(prev_L, x_tilde_at_event, provider: LipschitzVectorProvider) -> np.ndarray:
    """Candidate L(||x_tilde(t_i)||) clipped componentwise by the previous L."""
    candidate = provider(float(np.linalg.norm(x_tilde_at_event)))
    if prev_L is None:
        return candidate
    return np.minimum(candidate, prev_L)


def fire_event(state: TriggerState, xi_now, model: SystemModel, provider: LipschitzVectorProvider,
               params: TriggerParams, frozen_ledger: bool = False) -> TriggerState:
    """Sample xi, recompute the control and advance the ledger.

    Returns `state` unchanged when ||x_tilde|| < r, which no event may do.
    With `frozen_ledger`, L stays at the value set on the first event.
    """
    xi_now = np.asarray(xi_now, dtype=float)
    x_tilde = xi_now[: model.n]
    if math.sqrt(float(x_tilde @ x_tilde)) < params.r:
        return state
    if frozen_ledger and state.L_current is not None:
        L = state.L_current
    else:
        L = update_L_ledger(state.L_current, x_tilde, provider)
    held = xi_now.copy()
    return replace(
        state,
        held_xi=held,
        held_u=np.asarray(model.gamma(held), dtype=float).reshape(-1),
        L_current=L,
        event_index=state.event_index + 1,
        armed=True,
    )
