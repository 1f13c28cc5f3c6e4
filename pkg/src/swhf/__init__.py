"""Stochastic Wasserstein Hamiltonian flows with common noise on finite weighted graphs."""

from .energy import EnergyPart, HamiltonianSpec, hamiltonian_value
from .errors import (
    BoundaryDensityError,
    ConfigError,
    ConvergenceError,
    DegenerateNoiseError,
    DensityError,
    GraphError,
    IntegrationError,
    SwhfError,
)
from .flow import FlowConfig, Scheme, Trajectory, energy_audit, integrate
from .graph import Graph, ThetaKind, complete_graph, cycle_graph, load_graph, path_graph
from .noise import WienerPath, WongZakaiPath, sample_wiener

__version__ = "0.1.0"

__all__ = [
    "BoundaryDensityError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateNoiseError",
    "DensityError",
    "EnergyPart",
    "FlowConfig",
    "Graph",
    "GraphError",
    "HamiltonianSpec",
    "IntegrationError",
    "Scheme",
    "SwhfError",
    "ThetaKind",
    "Trajectory",
    "WienerPath",
    "WongZakaiPath",
    "complete_graph",
    "cycle_graph",
    "energy_audit",
    "hamiltonian_value",
    "integrate",
    "load_graph",
    "path_graph",
    "sample_wiener",
]
