"""Conditional McKean-Vlasov jump diffusions with impulse control.

Particle simulation of the conditional law, a weak-form Fokker-Planck check,
the closed-form optimal dividend policy with fixed and proportional costs,
and numerical verification of its quasi-variational inequalities.
"""

__version__ = "0.1.0"

from .config import SimConfig, load_config
from .dividend import DividendSolution, ValueCase, check_case_split, solve
from .errors import MvImpulseError
from .kernels import BACKEND
from .model import ModelParams, constant_jumps, no_jumps, uniform_jumps, validate_params

__all__ = [
    "BACKEND",
    "DividendSolution",
    "ModelParams",
    "MvImpulseError",
    "SimConfig",
    "ValueCase",
    "check_case_split",
    "constant_jumps",
    "load_config",
    "no_jumps",
    "solve",
    "uniform_jumps",
    "validate_params",
]
