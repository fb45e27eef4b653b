"""Travelling fronts of a mosquito population under moving sterile-male releases."""
from .model import Equilibrium, ModelParams, ScalarParams, equilibrium, offspring_number, reaction
from .release import ReleaseProfile, lambda_at
from .solver import Grid, SchemeConfig, SolverError, StateField, Trajectory, simulate, simulate_scalar
from .waves import Outcome, RunSetup, classify_outcome, critical_amplitude, critical_speed, minimal_speed, track_front
from .constructions import (
    scalar_sub,
    scalar_super,
    system_sub,
    system_super,
    verify_ms_bound,
    verify_ordering,
    verify_subsolution,
    verify_supersolution,
)

__version__ = "0.1.0"
