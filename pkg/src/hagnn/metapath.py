"""Meta-path graphs, node-type selection, fused meta-path graphs and redundancy statistics."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from hagnn.hetgraph import GraphError, HeterogeneousGraph, MetaPath, SparseAdjacency, average_degree
from hagnn.sparse import chain_product

DEFAULT_THRESHOLD = 0.01
DEFAULT_MAX_NNZ = 500_000_000


@dataclass(frozen=True)
class MetaPathGraph:
    node_type: int
    meta_path: MetaPath
    adjacency: SparseAdjacency

    @property
    def num_edges(self) -> int:
        return self.adjacency.nnz


@dataclass(frozen=True)
class FusedMetaPathGraph:
    node_type: int
    meta_paths: tuple[MetaPath, ...]
    adjacency: SparseAdjacency

    @property
    def num_edges(self) -> int:
        return self.adjacency.nnz


@dataclass(frozen=True)
class ReductionStats:
    member_edges: int
    fused_edges: int

    @property
    def reduction_rate(self) -> float:
        if self.member_edges == 0:
            return 0.0
        return 1.0 - self.fused_edges / self.member_edges

    def as_dict(self) -> dict:
        return {
            "member_edges": self.member_edges,
            "fused_edges": self.fused_edges,
            "reduction_rate": self.reduction_rate,
            "reduction_percent": round(100 * self.reduction_rate, 2),
        }


def build_metapath_graph(
    g: HeterogeneousGraph,
    p: MetaPath,
    *,
    max_nnz: float | None = DEFAULT_MAX_NNZ,
    include_diagonal: bool = True,
) -> MetaPathGraph:
    """Path-instance count matrix of a closed meta-path: the product of its relation matrices."""
    g.validate_metapath(p)
    if not g.is_closed(p):
        raise GraphError(f"meta-path not composable: {describe(g, p)} is not closed")
    mats = [g.adjacency[e] for e in p.edge_type_sequence]
    names = [g.edge_types[e].name for e in p.edge_type_sequence]
    adj = chain_product(mats, max_nnz=max_nnz, names=names)
    if not include_diagonal:
        adj = drop_diagonal(adj)
    return MetaPathGraph(g.metapath_head(p), p, adj)


def drop_diagonal(a: SparseAdjacency) -> SparseAdjacency:
    keep = a.row != a.col
    return SparseAdjacency(a.rows, a.cols, a.row[keep], a.col[keep], a.weight[keep], canonical=True)


def select_types(
    g: HeterogeneousGraph, threshold: float = DEFAULT_THRESHOLD, catalog: Mapping[int, Sequence[MetaPath]] | None = None
) -> set[int]:
    """Node types whose share of all nodes exceeds `threshold` and that own a closed meta-path."""
    if not 0 <= threshold < 1:
        raise ValueError("threshold must lie in [0, 1)")
    catalog = catalog or {}
    total = g.num_nodes
    chosen = set()
    for t in g.node_types:
        if t.count / total <= threshold:
            continue
        paths = catalog.get(t.id, ())
        if any(g.is_closed(p) and g.metapath_head(p) == t.id for p in paths):
            chosen.add(t.id)
    return chosen


def fuse_metapath_graphs(graphs: Sequence[MetaPathGraph]) -> FusedMetaPathGraph:
    """Edge-set union of same-type meta-path graphs; a shared edge carries the summed path counts."""
    if not graphs:
        raise GraphError("cannot fuse an empty list of meta-path graphs")
    types = {m.node_type for m in graphs}
    if len(types) != 1:
        raise GraphError(f"type mismatch in fusion: node types {sorted(types)}")
    shape = graphs[0].adjacency.shape
    if any(m.adjacency.shape != shape for m in graphs):
        raise GraphError("type mismatch in fusion: adjacency shapes differ")
    fused = SparseAdjacency(
        shape[0],
        shape[1],
        np.concatenate([m.adjacency.row for m in graphs]),
        np.concatenate([m.adjacency.col for m in graphs]),
        np.concatenate([m.adjacency.weight for m in graphs]),
    )
    paths = tuple(sorted((m.meta_path for m in graphs), key=lambda p: p.edge_type_sequence))
    return FusedMetaPathGraph(types.pop(), paths, fused)


def information_redundancy(a: MetaPathGraph, b: MetaPathGraph) -> tuple[float, float]:
    """(jaccard, containment) overlap of two meta-path graphs' edge sets; weights are ignored."""
    if a.node_type != b.node_type:
        raise GraphError("redundancy needs meta-path graphs of one node type")
    ka, kb = a.adjacency.edge_keys(), b.adjacency.edge_keys()
    if len(ka) == 0 and len(kb) == 0:
        raise GraphError("undefined redundancy: both edge sets are empty")
    inter = len(np.intersect1d(ka, kb, assume_unique=True))
    union = len(ka) + len(kb) - inter
    smaller = min(len(ka), len(kb))
    return inter / union, (inter / smaller if smaller else 0.0)


def reduction_report(graphs: Sequence[MetaPathGraph], fused: FusedMetaPathGraph) -> ReductionStats:
    return ReductionStats(sum(m.num_edges for m in graphs), fused.num_edges)


def relation_strength(m: MetaPathGraph, strong_max_degree: float = 10.0) -> str:
    """'strong' for sparse meta-path graphs (average degree at most `strong_max_degree`), else 'weak'."""
    return "strong" if average_degree(m.adjacency) <= strong_max_degree else "weak"


# -- catalog resolution ------------------------------------------------------------------


def parse_metapath(g: HeterogeneousGraph, text: str) -> MetaPath:
    """Resolve `A-P-A` (node-type names) or `[author-paper, paper-author]` (edge-type names).

    A node-type hop must match exactly one edge type; schemas with parallel relations
    between the same pair of types need the edge-type form.
    """
    text = text.strip()
    if text.startswith("["):
        names = [s.strip() for s in text.strip("[]").split(",") if s.strip()]
        seq = tuple(g.edge_type_by_name(n).id for n in names)
        p = MetaPath(seq, text)
        g.validate_metapath(p)
        return p
    tokens = [s for s in re.split(r"\s*-\s*", text) if s]
    if len(tokens) < 2:
        raise GraphError(f"meta-path {text!r} needs at least two node types")
    types = [g.node_type_by_name(tok).id for tok in tokens]
    seq = []
    for s, d in zip(types, types[1:]):
        cands = g.edge_types_between(s, d)
        if not cands:
            raise GraphError(
                f"meta-path {text!r}: no relation {g.node_types[s].name}->{g.node_types[d].name}"
                " (add reverse relations?)"
            )
        if len(cands) > 1:
            raise GraphError(
                f"meta-path {text!r}: ambiguous hop {g.node_types[s].name}->{g.node_types[d].name}"
                f" ({', '.join(c.name for c in cands)}); use the edge-type form"
            )
        seq.append(cands[0].id)
    return MetaPath(tuple(seq), text)


def resolve_catalog(g: HeterogeneousGraph, paths_by_type: Mapping[str, Iterable[str]]) -> dict[int, list[MetaPath]]:
    """{node type name: [meta-path strings]} -> {node type id: [MetaPath]}."""
    out: dict[int, list[MetaPath]] = {}
    for type_name, paths in paths_by_type.items():
        tid = g.node_type_by_name(type_name).id
        resolved = [parse_metapath(g, p) for p in paths]
        for p in resolved:
            if g.metapath_head(p) != tid or not g.is_closed(p):
                raise GraphError(f"meta-path {p.name!r} is not a closed meta-path of type {type_name!r}")
        out[tid] = resolved
    return out


def describe(g: HeterogeneousGraph, p: MetaPath) -> str:
    if p.name:
        return p.name
    seq = p.edge_type_sequence
    names = [g.node_types[g.edge_types[seq[0]].src_type].name]
    names += [g.node_types[g.edge_types[e].dst_type].name for e in seq]
    return "-".join(names)


def build_fused_graphs(
    g: HeterogeneousGraph,
    catalog: Mapping[int, Sequence[MetaPath]],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    max_nnz: float | None = DEFAULT_MAX_NNZ,
    include_diagonal: bool = True,
) -> tuple[dict[int, FusedMetaPathGraph], dict[int, list[MetaPathGraph]]]:
    """Select types, then build and fuse their meta-path graphs. Returns (fused, members) keyed by type."""
    fused, members = {}, {}
    for t in sorted(select_types(g, threshold, catalog)):
        graphs = [
            build_metapath_graph(g, p, max_nnz=max_nnz, include_diagonal=include_diagonal) for p in catalog[t]
        ]
        members[t] = graphs
        fused[t] = fuse_metapath_graphs(graphs)
    return fused, members
