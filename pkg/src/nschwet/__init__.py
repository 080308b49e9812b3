"""Diffuse-interface binary-fluid Couette flow with dynamic wetting."""
from .params import CaseConfig, ConfigError
from .harness import load_preset, run_case, sweep_epsilon

__all__ = ["CaseConfig", "ConfigError", "load_preset", "run_case", "sweep_epsilon"]
__version__ = "0.1.0"
