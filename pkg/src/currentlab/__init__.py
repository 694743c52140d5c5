"""Random-current toolkit: exact identity verification on small graphs,
Pfaffian boundary correlations, and critical-point Monte Carlo."""

__version__ = "0.1.0"

from .graphs import CouplingGraph, LatticeSpec, build_decorated, build_lattice, load_graph, save_graph
from .exact import ThermoParams, partition_function, correlation, ursell4

__all__ = [
    "CouplingGraph",
    "LatticeSpec",
    "ThermoParams",
    "build_decorated",
    "build_lattice",
    "load_graph",
    "save_graph",
    "partition_function",
    "correlation",
    "ursell4",
    "__version__",
]
