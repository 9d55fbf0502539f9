"""Decentralized optimization over networks: conjugate-gradient and memoryless-BFGS methods,
gradient-tracking baselines, and tools to check their convergence guarantees numerically."""

from .algorithms import (
    AlgoParams,
    DivergenceError,
    NodeStates,
    dmbfgs_stepsize_bound,
    make_stepper,
    ndcg_stepsize_bound,
)
from .kernels import BACKEND
from .problems import LogisticProblem, QuadraticProblem, Regularizer, SmoothnessConstants
from .runner import ConfigError, ExperimentConfig, RunResult, compare, load_config, run
from .topology import Graph, MixingMatrix, generate_connected_graph, metropolis_weights

__version__ = "0.1.0"

__all__ = [
    "AlgoParams",
    "BACKEND",
    "ConfigError",
    "DivergenceError",
    "ExperimentConfig",
    "Graph",
    "LogisticProblem",
    "MixingMatrix",
    "NodeStates",
    "QuadraticProblem",
    "Regularizer",
    "RunResult",
    "SmoothnessConstants",
    "compare",
    "dmbfgs_stepsize_bound",
    "generate_connected_graph",
    "load_config",
    "make_stepper",
    "metropolis_weights",
    "ndcg_stepsize_bound",
    "run",
]
