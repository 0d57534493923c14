"""Estimation of distribution algorithm with a deep Boltzmann machine model."""

from .dbm import DbmParams, FantasyParticles, NetworkShape
from .eda import DbmSettings, EdaConfig, RunResult, run_eda
from .problems import NkInstance, ProblemInstance, make_problem
from .rbm import RbmParams, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "DbmParams",
    "DbmSettings",
    "EdaConfig",
    "FantasyParticles",
    "NetworkShape",
    "NkInstance",
    "ProblemInstance",
    "RbmParams",
    "RunResult",
    "TrainConfig",
    "make_problem",
    "run_eda",
]
