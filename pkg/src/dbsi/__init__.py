"""Distributed adaptive blind SIMO system identification over sensor networks."""

from dbsi.errors import (
    ConfigError,
    DbsiError,
    EstimatorDivergence,
    IsolationError,
    SimulationError,
    TopologyError,
)
from dbsi.topology import Topology, build_custom, build_ring, is_connected
from dbsi.weights import (
    WeightMatrix,
    best_constant_weights,
    convergence_factor,
    metropolis_weights,
)

__all__ = [
    "ConfigError",
    "DbsiError",
    "EstimatorDivergence",
    "IsolationError",
    "SimulationError",
    "Topology",
    "TopologyError",
    "WeightMatrix",
    "best_constant_weights",
    "build_custom",
    "build_ring",
    "convergence_factor",
    "is_connected",
    "metropolis_weights",
]

__version__ = "0.1.0"
