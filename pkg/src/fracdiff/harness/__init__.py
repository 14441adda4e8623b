"""Experiment harness: configuration, registry, convergence studies and output files."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .convergence import ConvergenceRow, space_convergence, time_convergence
from .experiments import REGISTRY, ExperimentFailed, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "ConvergenceRow",
    "space_convergence",
    "time_convergence",
    "REGISTRY",
    "ExperimentFailed",
    "run_experiment",
]
