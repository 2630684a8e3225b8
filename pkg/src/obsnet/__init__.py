"""Cluster decomposition of directed graphs and detectability of consensus-observer networks."""

from .digraph import (
    ClusterDecomposition,
    DecompositionError,
    Digraph,
    GraphError,
    SpanningTree,
    clusters,
    exact_rank,
    laplacian,
    nullspace_basis,
    reach,
    scc_count,
    spanning_tree,
    zero_multiplicity,
)
from .netdetect import (
    DetectabilityReport,
    ObserverNetworkSystem,
    analyze,
    build_stacked,
    collective_detectability,
    lemma3_condition,
    theorem2_check,
    theorem3_sufficient,
)
from .simulator import GainSet, SimulationConfig, closed_loop_matrix, simulate
from .subspaces import (
    SubspaceBasis,
    Tolerances,
    block_product,
    intersect,
    observability_matrix,
    pbh_detectable,
    pbh_observable,
    undetectable_subspace,
    unobservable_subspace,
)

__version__ = "0.1.0"
