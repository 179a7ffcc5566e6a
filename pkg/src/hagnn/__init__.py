"""Heterogeneous graph attention with fused meta-path graphs and structural edge residuals."""

from hagnn.hetgraph import (
    EdgeType,
    GraphError,
    HeterogeneousGraph,
    MetaPath,
    NodeType,
    SparseAdjacency,
    average_degree,
    reverse_adjacency,
    validate_graph,
)
from hagnn.metapath import (
    FusedMetaPathGraph,
    MetaPathGraph,
    build_metapath_graph,
    fuse_metapath_graphs,
    information_redundancy,
    reduction_report,
    select_types,
)
from hagnn.structsem import StructuralWeights, normalize_structural_weights

__version__ = "0.1.0"
