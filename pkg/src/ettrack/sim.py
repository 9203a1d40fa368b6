"""Fixed-step closed-loop simulation with per-step trigger evaluation.

The loop at each grid time t_k: evaluate the trigger on the current state and
fire if due, log the record, then advance one RK4 step with the held control.
An event detected at t_k therefore acts from t_k onwards, and the logged e is 0
at every event record.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .core import LyapunovCertificate, ultimate_bound
from .errors import InvariantViolation, NumericalBlowup, ZenoSuspected
from .systems import LipschitzConstants, LipschitzVectorProvider, ReferenceSignal, SystemModel
from .trigger import TriggerParams, TriggerState, _threshold, fire_event

BLOWUP_LIMIT = 1e12
FIRST_ARMING = "first-arming"
THRESHOLD_CROSSING = "threshold-crossing"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    horizon: float = 10.0
    zeno_guard: int = 50
    zeno_window: float = 0.01
    invariant_checks: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon > 0 and self.zeno_window > 0 and self.zeno_guard > 0):
            raise ValueError("dt, horizon, zeno_window and zeno_guard must be positive")
        if self.dt > self.zeno_window:
            raise ValueError("dt must not exceed zeno_window")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least one step")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class Scenario:
    name: str
    model: SystemModel
    cert: LyapunovCertificate
    provider: LipschitzVectorProvider
    params: TriggerParams
    reference: ReferenceSignal
    x0: np.ndarray
    sim: SimConfig = field(default_factory=SimConfig)
    ledger_mode: str = "varying"
    # bound-computation settings
    R0: Optional[float] = None
    lipschitz_override: Optional[LipschitzConstants] = None
    lipschitz_samples: int = 100_000
    lipschitz_seed: int = 0

    def __post_init__(self):
        if self.ledger_mode not in ("varying", "frozen"):
            raise ValueError(f"ledger_mode must be 'varying' or 'frozen', got {self.ledger_mode!r}")

    @property
    def r1(self) -> float:
        return ultimate_bound(self.params.r, self.cert.alpha1, self.cert.alpha2)


@dataclass
class TrajectoryLog:
    t: np.ndarray
    x: np.ndarray
    x_d: np.ndarray
    v: np.ndarray
    x_tilde: np.ndarray
    u: np.ndarray
    e: np.ndarray
    V: np.ndarray
    g: np.ndarray
    norm_xt: np.ndarray
    lte: np.ndarray  # L_i' |e|
    armed: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class Event:
    index: int
    step: int
    t: float
    x_tilde: np.ndarray
    L: np.ndarray
    reason: str

    @property
    def norm_xt(self) -> float:
        return float(np.linalg.norm(self.x_tilde))


@dataclass(frozen=True)
class Metrics:
    total_updates: int
    min_inter_exec: float
    avg_freq_total: float
    avg_freq_transient: float
    transient_updates: int
    first_entry_time: float
    ultimate_bound_observed: float
    settled: bool
    r1: float
    arming_counted: bool = True

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Violation:
    kind: str  # "lyapunov-decrease" or "level-set-exit"
    step: int
    t: float
    detail: str


class RunResult(NamedTuple):
    trajectory: TrajectoryLog
    events: List[Event]
    metrics: Metrics


def _make_rhs(model: SystemModel, reference: ReferenceSignal):
    n = model.n
    f, f_r = model.f, model.f_r
    if reference.integrated:
        v_dot = reference.v_dot

        def rhs(t, z, u):
            x, xd, v = z[:n], z[n:2 * n], z[2 * n:]
            return np.concatenate((f(x, u), f_r(xd, v), v_dot(t, v)))
    else:
        v_of_t = reference.v_of_t

        def rhs(t, z, u):
            return np.concatenate((f(z[:n], u), f_r(z[n:], v_of_t(t))))
    return rhs


def rk4_step(rhs, t: float, z: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step with u held over the step."""
    k1 = rhs(t, z, u)
    k2 = rhs(t + 0.5 * dt, z + (0.5 * dt) * k1, u)
    k3 = rhs(t + 0.5 * dt, z + (0.5 * dt) * k2, u)
    k4 = rhs(t + dt, z + dt * k3, u)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def initial_stack(scenario: Scenario) -> np.ndarray:
    ref = scenario.reference
    parts = [np.asarray(scenario.x0, float), np.asarray(ref.x_d0, float)]
    if ref.integrated:
        parts.append(np.asarray(ref.v0, float))
    return np.concatenate(parts)


def step(z: np.ndarray, t: float, u: np.ndarray, model: SystemModel, reference: ReferenceSignal,
         dt: float) -> np.ndarray:
    """Advance the stacked state [x; x_d] (plus v when ode-driven) by one step."""
    if not np.all(np.isfinite(z)):
        raise NumericalBlowup(f"non-finite state at t={t}")
    z_next = rk4_step(_make_rhs(model, reference), t, z, u, dt)
    if not np.all(np.abs(z_next) < BLOWUP_LIMIT):
        raise NumericalBlowup(f"state exceeded {BLOWUP_LIMIT:g} at t={t + dt}")
    return z_next


def reference_trajectory(model: SystemModel, reference: ReferenceSignal, horizon: float, dt: float):
    """(t, x_d, v) sampled on the simulation grid, without the plant."""
    n = model.n
    steps = int(round(horizon / dt))
    t = np.arange(steps + 1) * dt
    xd = np.empty((steps + 1, n))
    v = np.empty((steps + 1, model.q))
    z = np.concatenate([reference.x_d0, reference.v0]) if reference.integrated else np.array(reference.x_d0, float)
    if reference.integrated:
        rhs = lambda tt, zz, _u: np.concatenate((model.f_r(zz[:n], zz[n:]), reference.v_dot(tt, zz[n:])))
    else:
        rhs = lambda tt, zz, _u: np.asarray(model.f_r(zz, reference.v_of_t(tt)))
    for k in range(steps + 1):
        xd[k] = z[:n]
        v[k] = z[n:] if reference.integrated else reference.v_of_t(t[k])
        if k < steps:
            z = rk4_step(rhs, t[k], z, None, dt)
    return t, xd, v


def run(scenario: Scenario, invariant_checks: Optional[bool] = None) -> RunResult:
    """Simulate the event-triggered loop over the configured horizon.

    Raises ZenoSuspected when more than `zeno_guard` events fall inside one
    `zeno_window`, NumericalBlowup on divergence, and InvariantViolation when
    checks are on and the Lyapunov invariants fail.
    """
    model, ref, params, cfg = scenario.model, scenario.reference, scenario.params, scenario.sim
    cert, provider = scenario.cert, scenario.provider
    checks = cfg.invariant_checks if invariant_checks is None else invariant_checks
    frozen = scenario.ledger_mode == "frozen"
    n, m, q = model.n, model.m, model.q
    dt, N, r = cfg.dt, cfg.steps, params.r
    rhs = _make_rhs(model, ref)
    integrated = ref.integrated
    v_of_t = ref.v_of_t

    t_log = np.arange(N + 1) * dt
    xs = np.empty((N + 1, n))
    xds = np.empty((N + 1, n))
    vs = np.empty((N + 1, q))
    us = np.empty((N + 1, m))
    es = np.zeros((N + 1, model.xi_dim))
    Vs = np.empty(N + 1)
    gs = np.full(N + 1, np.nan)
    ltes = np.full(N + 1, np.nan)
    norms = np.empty(N + 1)
    armed_log = np.zeros(N + 1, dtype=bool)

    z = initial_stack(scenario)
    state = TriggerState.initial(model)
    events: List[Event] = []
    recent = deque()
    value = cert.value

    for k in range(N + 1):
        t = t_log[k]
        x = z[:n]
        xd = z[n:2 * n]
        v = z[2 * n:] if integrated else np.asarray(v_of_t(t), dtype=float)
        xt = x - xd
        s = math.sqrt(float(xt @ xt))
        xi = np.concatenate((xt, xd, v))

        reason = None
        if not state.armed:
            if s >= r:
                reason = FIRST_ARMING
        else:
            g = float(state.L_current @ np.abs(state.held_xi - xi)) - _threshold(s, params, cert)
            if g >= 0.0 and s >= r:
                reason = THRESHOLD_CROSSING
        if reason is not None:
            state = fire_event(state, xi, model, provider, params, frozen_ledger=frozen)
            events.append(Event(state.event_index, k, float(t), xt.copy(), state.L_current, reason))
            recent.append(t)
            while recent and recent[0] <= t - cfg.zeno_window:
                recent.popleft()
            if len(recent) > cfg.zeno_guard:
                raise ZenoSuspected(
                    f"{len(recent)} events within {cfg.zeno_window} s ending at t={t:.6f} "
                    f"(guard {cfg.zeno_guard}); check the triggering parameters")

        xs[k], xds[k], vs[k] = x, xd, v
        us[k] = state.held_u
        norms[k] = s
        Vs[k] = value(xt)
        if state.armed:
            e = state.held_xi - xi
            es[k] = e
            lte = float(state.L_current @ np.abs(e))
            ltes[k] = lte
            gs[k] = lte - _threshold(s, params, cert)
            armed_log[k] = True

        if k == N:
            break
        z = rk4_step(rhs, t, z, state.held_u, dt)
        if not np.all(np.abs(z) < BLOWUP_LIMIT):
            raise NumericalBlowup(f"state exceeded {BLOWUP_LIMIT:g} at t={t + dt:.6f}")

    traj = TrajectoryLog(t=t_log, x=xs, x_d=xds, v=vs, x_tilde=xs - xds, u=us, e=es, V=Vs, g=gs,
                         norm_xt=norms, lte=ltes, armed=armed_log)
    if checks:
        violations = runtime_invariant_check(traj, params, cert, dt)
        if violations:
            first = violations[0]
            raise InvariantViolation(
                f"{len(violations)} invariant violation(s); first: {first.kind} at t={first.t:.6f} ({first.detail})",
                record=first)
    metrics = compute_metrics(traj, events, scenario)
    return RunResult(traj, events, metrics)


def _vec_eval(fn, s: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(s), dtype=float)
        if out.shape == s.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([fn(float(x)) for x in s])


def runtime_invariant_check(traj: TrajectoryLog, params: TriggerParams, cert: LyapunovCertificate,
                            dt: float, sigma: Optional[float] = None) -> List[Violation]:
    """Scan a log for breaches of the Lyapunov decrease and the r-level-set invariance.

    (a) armed steps with ||x_tilde|| >= r must satisfy
        V(t+dt) - V(t) <= -(1 - sigma) alpha3(||x_tilde(t)||) dt + 1e-6 + 0.05 |dV|;
    (b) once armed with V <= alpha2(r), V stays below alpha2(r) (1 + 1e-3).
    `sigma` overrides params.sigma in (a) only.
    """
    sig = params.sigma if sigma is None else sigma
    out: List[Violation] = []
    V, norms, armed = traj.V, traj.norm_xt, traj.armed
    dV = np.diff(V)
    active = armed[:-1] & (norms[:-1] >= params.r)
    allowed = -(1.0 - sig) * _vec_eval(cert.alpha3, norms[:-1]) * dt + 1e-6 + 0.05 * np.abs(dV)
    for k in np.flatnonzero(active & (dV > allowed)):
        out.append(Violation("lyapunov-decrease", int(k), float(traj.t[k]),
                             f"dV={dV[k]:.3e} > allowed {allowed[k]:.3e}"))
    level = float(cert.alpha2(params.r))
    inside = np.flatnonzero(armed & (V <= level))
    if inside.size:
        k0 = inside[0]
        for k in k0 + np.flatnonzero(V[k0:] > level * (1.0 + 1e-3)):
            out.append(Violation("level-set-exit", int(k), float(traj.t[k]),
                                 f"V={V[k]:.6e} > alpha2(r)={level:.6e}"))
    out.sort(key=lambda w: w.step)
    return out


def compute_metrics(traj: TrajectoryLog, events: List[Event], scenario: Scenario) -> Metrics:
    cfg, r = scenario.sim, scenario.params.r
    times = np.array([ev.t for ev in events])
    gaps = np.diff(times)
    min_gap = float(gaps.min()) if gaps.size else math.inf
    inside = np.flatnonzero(traj.norm_xt <= r)
    if inside.size and inside[0] > 0:
        t_entry = float(traj.t[inside[0]])
        transient = int(np.sum(times < t_entry))
        f_transient = transient / t_entry
    else:
        t_entry, transient, f_transient = math.nan, len(events), math.nan
    tail = traj.t >= traj.t[-1] - 0.2 * cfg.horizon
    observed = float(traj.norm_xt[tail].max())
    r1 = scenario.r1
    return Metrics(
        total_updates=len(events),
        min_inter_exec=min_gap,
        avg_freq_total=len(events) / cfg.horizon,
        avg_freq_transient=f_transient,
        transient_updates=transient,
        first_entry_time=t_entry,
        ultimate_bound_observed=observed,
        settled=observed <= r1,
        r1=r1,
    )
