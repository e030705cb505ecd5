"""Cycle and loop representations of quantum spin systems.

Poisson bridge configurations and their cycle/loop decompositions, the
theta-weighted bridge Markov chains, the split-merge chain with
Poisson-Dirichlet samplers, and an exact-diagonalisation oracle for small
graphs.
"""

from .bridges import BridgeConfig, sample_rho
from .decomposition import Decomposition, cycles, decompose, loops
from .graph import Graph, complete_graph, cubic_lattice, parse_graph_spec
from .mcmc import ChainState, run_chain
from .splitmerge import Partition

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig", "ChainState", "Decomposition", "Graph", "Partition",
    "complete_graph", "cubic_lattice", "cycles", "decompose", "loops",
    "parse_graph_spec", "run_chain", "sample_rho",
]
