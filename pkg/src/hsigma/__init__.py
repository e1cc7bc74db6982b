"""Numerical verification lab for the H^{2|2} sigma model on pinned graphs.

Submodules: ``graph`` (pinned graphs and exhaustions), ``fields`` (field
algebra), ``measure`` (densities and closed forms), ``sampler`` (MCMC and
error bars), ``identities`` (checks), ``quadrature`` (deterministic checks),
``suites`` and ``cli``.
"""

from .graph import PinnedGraph, build_pinned_graph, load_exhaustion, load_graph
from .identities import IdentityVerdict, suite_passes
from .sampler import ChainConfig

__all__ = [
    "ChainConfig",
    "IdentityVerdict",
    "PinnedGraph",
    "build_pinned_graph",
    "load_exhaustion",
    "load_graph",
    "suite_passes",
]
__version__ = "0.1.0"
