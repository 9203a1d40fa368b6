"""Simulation and certification of event-triggered trajectory-tracking control."""
from .core import (ComparisonFunction, LevelSetSpec, LyapunovCertificate, QuadraticLyapunov,
                   radius_for_ultimate_bound, solve_lyapunov_equation, ultimate_bound)
from .sim import Scenario, SimConfig, run
from .trigger import TriggerParams

__version__ = "0.1.0"

__all__ = ["ComparisonFunction", "LevelSetSpec", "LyapunovCertificate", "QuadraticLyapunov", "Scenario",
           "SimConfig", "TriggerParams", "radius_for_ultimate_bound", "run", "solve_lyapunov_equation",
           "ultimate_bound"]
