"""Coalescing-branching random walks (COBRA) and their dual epidemic (BIPS)."""

from .graphs import (Graph, GraphError, VertexSet, gen_complete, gen_cycle, gen_hypercube,
                     gen_petersen, gen_random_regular, is_bipartite, is_connected, load_graph,
                     save_graph)
from .process import BranchingSpec, TrialRecord, bips_run, bips_step, cobra_run, cobra_step
from .spectral import SpectralSummary, lambda_max

__version__ = "0.1.0"
