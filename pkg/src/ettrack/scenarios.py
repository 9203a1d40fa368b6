"""Scenario configuration files and the built-in benchmark catalog.

Config files are flat ``key = value`` lines with dotted section names; ``#``
starts a comment. Vectors are comma separated, matrix rows separated by ``;``.
See README.md for the key list.
"""
from __future__ import annotations

import importlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import QuadraticLyapunov, radius_for_ultimate_bound
from .sim import Scenario, SimConfig
from .systems import (SPRING_B, LipschitzConstants, ReferenceSignal, case1_reference, case2_reference,
                      nonlinear_spring_model, quantize, spring_lipschitz_provider)
from .trigger import TriggerParams

# Values reported for the two benchmark runs, used in reproduction summaries.
REPORTED_VALUES = {
    "case1": {"total_updates": 301, "min_inter_exec": 0.005, "avg_freq_total": 30.0,
              "avg_freq_transient": 46.0, "frozen_avg_freq_total": 943.0,
              "frozen_avg_freq_transient": 1586.0, "T_lower": 6e-8, "r1": 0.1},
    "case2": {"total_updates": 304, "min_inter_exec": 0.005, "avg_freq_total": 30.0,
              "avg_freq_transient": 46.0, "T_lower": 3e-8, "r_min": 0.0075},
}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    model: str = "nonlinear-spring"
    model_factory: Optional[str] = None
    K: tuple = (-20.0, -20.0)
    H: tuple = ((1.0, 0.0), (0.0, 1.0))
    absorb_input: bool = True
    sigma: float = 0.95
    r: Optional[float] = None
    target_r1: Optional[float] = None
    reference: str = "case1"
    d: float = 2.5
    d1: float = 2.5
    x0: tuple = (5.0, -1.0)
    # custom reference: v = amplitude sin(frequency t + phase), optionally quantized
    x_d0: Optional[tuple] = None
    v_amplitude: float = 1.0
    v_frequency: float = 1.0
    v_phase: float = 0.0
    v_quantum: Optional[float] = None
    sim: SimConfig = field(default_factory=SimConfig)
    ledger_mode: str = "varying"
    R0: Optional[float] = None
    lipschitz_override: Optional[tuple] = None
    lipschitz_samples: int = 100_000
    lipschitz_seed: int = 0

    def __post_init__(self):
        if (self.r is None) == (self.target_r1 is None):
            raise ConfigError("give exactly one of trigger.r and trigger.target_r1")


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(" ", "").split(",") if t)


def _matrix(text: str) -> tuple:
    return tuple(_floats(row) for row in text.split(";") if row.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_KEYS = {
    "name": ("name", str),
    "model.builtin": ("model", str),
    "model.factory": ("model_factory", str),
    "model.K": ("K", _floats),
    "model.H": ("H", _matrix),
    "model.absorb_input": ("absorb_input", _bool),
    "trigger.sigma": ("sigma", float),
    "trigger.r": ("r", float),
    "trigger.target_r1": ("target_r1", float),
    "reference.kind": ("reference", str),
    "reference.d": ("d", float),
    "reference.d1": ("d1", float),
    "reference.x_d0": ("x_d0", _floats),
    "reference.v_amplitude": ("v_amplitude", float),
    "reference.v_frequency": ("v_frequency", float),
    "reference.v_phase": ("v_phase", float),
    "reference.v_quantum": ("v_quantum", float),
    "plant.x0": ("x0", _floats),
    "ledger.mode": ("ledger_mode", str),
    "bounds.R0": ("R0", float),
    "bounds.samples": ("lipschitz_samples", int),
    "bounds.seed": ("lipschitz_seed", int),
}
_SIM_KEYS = {"sim.dt": ("dt", float), "sim.horizon": ("horizon", float), "sim.zeno_guard": ("zeno_guard", int),
             "sim.zeno_window": ("zeno_window", float), "sim.invariant_checks": ("invariant_checks", _bool)}
_P_KEYS = ("bounds.P1", "bounds.P2", "bounds.P3")


def parse_config(text: str) -> ScenarioConfig:
    kwargs, sim_kwargs, p_vals = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in _KEYS:
                attr, conv = _KEYS[key]
                kwargs[attr] = conv(value)
            elif key in _SIM_KEYS:
                attr, conv = _SIM_KEYS[key]
                sim_kwargs[attr] = conv(value)
            elif key in _P_KEYS:
                p_vals[key] = float(value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    if p_vals:
        if len(p_vals) != 3:
            raise ConfigError("bounds.P1, bounds.P2 and bounds.P3 must be given together")
        kwargs["lipschitz_override"] = tuple(p_vals[k] for k in _P_KEYS)
    try:
        kwargs["sim"] = SimConfig(**sim_kwargs)
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def resolve_config_path(path) -> Path:
    p = Path(path)
    if not p.exists() and p.suffix != ".cfg" and Path(str(p) + ".cfg").exists():
        p = Path(str(p) + ".cfg")
    return p


def load_config(path) -> ScenarioConfig:
    p = resolve_config_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _custom_reference(cfg: ScenarioConfig) -> ReferenceSignal:
    amp, w, ph = cfg.v_amplitude, cfg.v_frequency, cfg.v_phase
    x_d0 = np.array(cfg.x_d0 if cfg.x_d0 is not None else (0.0, 0.0))
    v0 = np.array([amp * math.sin(ph)])
    if cfg.v_quantum is None:
        return ReferenceSignal(kind="analytic", x_d0=x_d0, v0=v0, d=cfg.d, d1=cfg.d1,
                               v_of_t=lambda t: np.array([amp * math.sin(w * t + ph)]),
                               c=abs(amp * w), d_v=abs(amp), name="custom")
    step = cfg.v_quantum
    fn = lambda t: np.array([quantize(amp * math.sin(w * t + ph), step, amp * w * math.cos(w * t + ph))])
    # closest level crossings of a sinusoid straddle its zero crossing
    dwell = 2.0 * math.asin(min(1.0, 0.5 * step / abs(amp))) / abs(w) if amp else math.inf
    return ReferenceSignal(kind="quantized", x_d0=x_d0, v0=fn(0.0), d=cfg.d, d1=cfg.d1, v_of_t=fn,
                           c=0.0, dwell=dwell, jump=step, d_v=abs(amp) + 0.5 * step, name="custom")


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    H = np.array(cfg.H, dtype=float)
    if cfg.model_factory:
        mod_name, _, fn_name = cfg.model_factory.partition(":")
        try:
            factory = getattr(importlib.import_module(mod_name), fn_name)
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"cannot load model factory {cfg.model_factory!r}: {exc}") from exc
        model, cert, provider = factory(cfg)
    elif cfg.model == "nonlinear-spring":
        model = nonlinear_spring_model(cfg.K)
        cert = QuadraticLyapunov.from_closed_loop(model.meta["Atilde"], H, B=SPRING_B,
                                                  absorb_input=cfg.absorb_input)
        provider = spring_lipschitz_provider(cfg.K, cfg.d1, cert)
    else:
        raise ConfigError(f"unknown model {cfg.model!r}")

    if cfg.reference == "case1":
        ref = case1_reference(d=cfg.d, d1=cfg.d1)
    elif cfg.reference == "case2":
        ref = case2_reference(d=cfg.d, d1=cfg.d1)
    elif cfg.reference == "custom":
        ref = _custom_reference(cfg)
    else:
        raise ConfigError(f"unknown reference {cfg.reference!r}")

    r = cfg.r if cfg.r is not None else radius_for_ultimate_bound(cfg.target_r1, cert.alpha1, cert.alpha2)
    override = LipschitzConstants(*cfg.lipschitz_override) if cfg.lipschitz_override else None
    try:
        return Scenario(
            name=cfg.name, model=model, cert=cert, provider=provider, params=TriggerParams(cfg.sigma, r),
            reference=ref, x0=np.array(cfg.x0, dtype=float), sim=cfg.sim, ledger_mode=cfg.ledger_mode,
            R0=cfg.R0, lipschitz_override=override, lipschitz_samples=cfg.lipschitz_samples,
            lipschitz_seed=cfg.lipschitz_seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def builtin_config(name: str, **overrides) -> ScenarioConfig:
    """Configs of the two benchmark runs: K = -[20, 20], H = I, sigma = 0.95, r = 0.0154."""
    if name not in ("case1", "case2"):
        raise KeyError(name)
    cfg = ScenarioConfig(name=name, reference=name, r=0.0154)
    return replace(cfg, **overrides)


def builtin_scenario(name: str, **overrides) -> Scenario:
    return build_scenario(builtin_config(name, **overrides))
