"""Distributed zero-order stochastic optimisation over communication graphs.

Agents on a graph each hold an iterate, estimate gradients from two noisy
function values with a smoothing kernel, average with their neighbours through
a doubly stochastic mixing matrix and project back onto a convex set.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, build_problem, config_hash, parse_config
from .errors import ConfigError, DivergenceError, DZOError, NumericalError, ValidationFailure
from .estimator import probe_bias, probe_second_moment, zo_gradient_kernel, zo_gradient_plain
from .hard import HardInstance, hard_check, make_hard_instance
from .kernel import Kernel, build_legendre_kernel, check_kernel
from .metrics import Trace, aggregate_traces, fit_rate
from .network import build_topology, metropolis_matrix
from .noise import NoiseModel
from .objectives import Ball, Box, make_least_squares, make_quadratic
from .optimizer import Problem, Schedule, consensus_step, run, schedule_values, simulate

__all__ = [
    "__version__",
    "Ball", "Box", "ConfigError", "DZOError", "DivergenceError", "ExperimentConfig",
    "HardInstance", "Kernel", "NoiseModel", "NumericalError", "Problem", "Schedule",
    "Trace", "ValidationFailure", "aggregate_traces", "build_legendre_kernel",
    "build_problem", "build_topology", "check_kernel", "config_hash", "consensus_step",
    "fit_rate", "hard_check", "make_hard_instance", "make_least_squares",
    "make_quadratic", "metropolis_matrix", "parse_config", "probe_bias",
    "probe_second_moment", "run", "schedule_values", "simulate", "zo_gradient_kernel",
    "zo_gradient_plain",
]
