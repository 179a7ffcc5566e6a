"""Typed graph data model: node/edge types, per-relation sparse adjacency, features, labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class NodeType:
    id: int
    name: str
    count: int
    feature_dim: int
    # "raw" | "identity" | "random"; synthetic kinds are filled in by ensure_features
    feature_kind: str = "raw"

    @property
    def featureless(self) -> bool:
        return self.feature_kind != "raw" or self.feature_dim == 0


@dataclass(frozen=True)
class EdgeType:
    id: int
    name: str
    src_type: int
    dst_type: int


class SparseAdjacency:
    """Canonical COO matrix: entries sorted row-major, no duplicates, integer weights > 0."""

    __slots__ = ("rows", "cols", "row", "col", "weight", "_indptr")

    def __init__(self, rows: int, cols: int, row, col, weight, *, canonical: bool = False):
        self.rows = int(rows)
        self.cols = int(cols)
        row = np.asarray(row, dtype=np.int64).ravel()
        col = np.asarray(col, dtype=np.int64).ravel()
        weight = np.asarray(weight, dtype=np.int64).ravel()
        if not (len(row) == len(col) == len(weight)):
            raise GraphError("row/col/weight length mismatch")
        if not canonical:
            row, col, weight = _coalesce(row, col, weight, self.cols)
        self.row, self.col, self.weight = row, col, weight
        self._indptr = None

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries) -> "SparseAdjacency":
        entries = list(entries)
        if not entries:
            return cls.empty(rows, cols)
        arr = np.asarray(entries, dtype=np.int64).reshape(len(entries), -1)
        w = arr[:, 2] if arr.shape[1] > 2 else np.ones(len(arr), dtype=np.int64)
        return cls(rows, cols, arr[:, 0], arr[:, 1], w)

    @classmethod
    def from_dense(cls, dense) -> "SparseAdjacency":
        dense = np.asarray(dense)
        r, c = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], r, c, dense[r, c], canonical=True)

    @classmethod
    def empty(cls, rows: int, cols: int) -> "SparseAdjacency":
        z = np.zeros(0, dtype=np.int64)
        return cls(rows, cols, z, z, z, canonical=True)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.row)

    @property
    def indptr(self) -> np.ndarray:
        if self._indptr is None:
            counts = np.bincount(self.row, minlength=self.rows) if self.rows else np.zeros(0, np.int64)
            self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return self._indptr

    def entries(self) -> list[tuple[int, int, int]]:
        return list(zip(self.row.tolist(), self.col.tolist(), self.weight.tolist()))

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.row.tolist(), self.col.tolist()))

    def edge_keys(self) -> np.ndarray:
        """Sorted int64 keys row * cols + col, for fast set algebra."""
        return self.row * max(self.cols, 1) + self.col

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        out[self.row, self.col] = self.weight
        return out

    def is_symmetric(self) -> bool:
        if self.rows != self.cols:
            return False
        return self == reverse_adjacency(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseAdjacency):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row, other.row)
            and np.array_equal(self.col, other.col)
            and np.array_equal(self.weight, other.weight)
        )

    def __repr__(self) -> str:
        return f"SparseAdjacency({self.rows}x{self.cols}, nnz={self.nnz})"


def _coalesce(row, col, weight, ncols):
    if len(row) == 0:
        return row, col, weight
    key = row * max(ncols, 1) + col
    order = np.argsort(key, kind="stable")
    key, row, col, weight = key[order], row[order], col[order], weight[order]
    starts = np.flatnonzero(np.concatenate([[True], key[1:] != key[:-1]]))
    weight = np.add.reduceat(weight, starts)
    row, col = row[starts], col[starts]
    keep = weight != 0
    return row[keep], col[keep], weight[keep]


@dataclass(frozen=True)
class MetaPath:
    edge_type_sequence: tuple[int, ...]
    name: str = ""

    @property
    def length(self) -> int:
        return len(self.edge_type_sequence)


@dataclass
class HeterogeneousGraph:
    node_types: list[NodeType]
    edge_types: list[EdgeType]
    adjacency: list[SparseAdjacency]
    features: list[Optional[np.ndarray]]
    labels: dict[int, np.ndarray] = field(default_factory=dict)
    # type id -> {"train"|"val"|"test": bool mask}
    splits: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return sum(t.count for t in self.node_types)

    def node_type_by_name(self, name: str) -> NodeType:
        for t in self.node_types:
            if t.name == name:
                return t
        raise GraphError(f"unknown node type {name!r}")

    def edge_type_by_name(self, name: str) -> EdgeType:
        for e in self.edge_types:
            if e.name == name:
                return e
        raise GraphError(f"unknown edge type {name!r}")

    def edge_types_between(self, src: int, dst: int) -> list[EdgeType]:
        return [e for e in self.edge_types if e.src_type == src and e.dst_type == dst]

    def validate_metapath(self, path: MetaPath) -> None:
        seq = path.edge_type_sequence
        if not seq:
            raise GraphError("meta-path not composable: empty edge type sequence")
        for eid in seq:
            if not 0 <= eid < len(self.edge_types):
                raise GraphError(f"meta-path not composable: unknown edge type {eid}")
        for a, b in zip(seq, seq[1:]):
            if self.edge_types[a].dst_type != self.edge_types[b].src_type:
                raise GraphError(
                    f"meta-path not composable: {self.edge_types[a].name} -> {self.edge_types[b].name}"
                )

    def metapath_head(self, path: MetaPath) -> int:
        return self.edge_types[path.edge_type_sequence[0]].src_type

    def is_closed(self, path: MetaPath) -> bool:
        seq = path.edge_type_sequence
        return self.edge_types[seq[0]].src_type == self.edge_types[seq[-1]].dst_type


def validate_graph(g: HeterogeneousGraph) -> list[str]:
    """All invariant violations of `g` as messages; an empty list means the graph is well formed."""
    problems: list[str] = []
    nt, et = g.node_types, g.edge_types
    if len(nt) + len(et) <= 2:
        problems.append("not heterogeneous: |T| + |R| must exceed 2")
    for i, t in enumerate(nt):
        if t.id != i:
            problems.append(f"node type ids not contiguous at position {i} (id={t.id})")
        if t.count < 1:
            problems.append(f"node type {t.name!r} has count {t.count} < 1")
        if t.feature_dim < 0:
            problems.append(f"node type {t.name!r} has negative feature_dim")
    for i, e in enumerate(et):
        if e.id != i:
            problems.append(f"edge type ids not contiguous at position {i} (id={e.id})")
        if not (0 <= e.src_type < len(nt) and 0 <= e.dst_type < len(nt)):
            problems.append(f"edge type {e.name!r} references a missing node type")
    if len(g.adjacency) != len(et):
        problems.append(f"{len(g.adjacency)} adjacency matrices for {len(et)} edge types")
    for e, a in zip(et, g.adjacency):
        if not (0 <= e.src_type < len(nt) and 0 <= e.dst_type < len(nt)):
            continue
        if a.rows != nt[e.src_type].count or a.cols != nt[e.dst_type].count:
            problems.append(
                f"edge type {e.name!r}: adjacency shape {a.shape} does not match "
                f"({nt[e.src_type].count}, {nt[e.dst_type].count})"
            )
        if a.nnz:
            if a.row.min() < 0 or a.row.max() >= a.rows or a.col.min() < 0 or a.col.max() >= a.cols:
                problems.append(f"edge type {e.name!r}: index out of range")
            key = a.row * max(a.cols, 1) + a.col
            if np.any(key[1:] < key[:-1]):
                problems.append(f"edge type {e.name!r}: entries not sorted row-major")
            if np.any(key[1:] == key[:-1]):
                problems.append(f"edge type {e.name!r}: duplicate entries")
            if np.any(a.weight <= 0):
                problems.append(f"edge type {e.name!r}: non-positive weight")
    if len(g.features) != len(nt):
        problems.append(f"{len(g.features)} feature matrices for {len(nt)} node types")
    else:
        for t, x in zip(nt, g.features):
            if x is None:
                if t.feature_kind == "raw" and t.feature_dim > 0:
                    problems.append(f"node type {t.name!r}: missing features")
                continue
            if x.shape != (t.count, t.feature_dim):
                problems.append(
                    f"node type {t.name!r}: feature shape {x.shape} != ({t.count}, {t.feature_dim})"
                )
    for tid, y in g.labels.items():
        if not 0 <= tid < len(nt):
            problems.append(f"labels for missing node type {tid}")
        elif y.shape[0] != nt[tid].count:
            problems.append(f"labels for {nt[tid].name!r} have {y.shape[0]} rows, expected {nt[tid].count}")
    for tid, masks in g.splits.items():
        if not 0 <= tid < len(nt):
            problems.append(f"splits for missing node type {tid}")
            continue
        stacked = np.stack([np.asarray(m, dtype=bool) for m in masks.values()]) if masks else None
        if stacked is None:
            continue
        if stacked.shape[1] != nt[tid].count:
            problems.append(f"split masks for {nt[tid].name!r} have wrong length")
            continue
        if np.any(stacked.sum(axis=0) > 1):
            problems.append(f"split masks for {nt[tid].name!r} overlap")
        y = g.labels.get(tid)
        if y is not None:
            labeled = y.reshape(len(y), -1).any(axis=1)
            if np.any(labeled & (stacked.sum(axis=0) == 0)):
                problems.append(f"labeled {nt[tid].name!r} nodes outside every split")
    return problems


def reverse_adjacency(a: SparseAdjacency) -> SparseAdjacency:
    return SparseAdjacency(a.cols, a.rows, a.col, a.row, a.weight)


def average_degree(a: SparseAdjacency) -> Fraction:
    """Entries per source node, exact. Round with `float(...)` for reporting."""
    if a.rows == 0:
        raise GraphError("empty node set")
    return Fraction(a.nnz, a.rows)


def add_reverse_relations(g: HeterogeneousGraph) -> HeterogeneousGraph:
    """Append a `rev_<name>` relation for every edge type that has no exact transpose already."""
    new_types = list(g.edge_types)
    new_adj = list(g.adjacency)
    for e, a in zip(g.edge_types, g.adjacency):
        rev = reverse_adjacency(a)
        has_inverse = any(
            other.src_type == e.dst_type and other.dst_type == e.src_type and adj == rev
            for other, adj in zip(new_types, new_adj)
        )
        if not has_inverse:
            new_types.append(EdgeType(len(new_types), f"rev_{e.name}", e.dst_type, e.src_type))
            new_adj.append(rev)
    return HeterogeneousGraph(g.node_types, new_types, new_adj, g.features, g.labels, g.splits)


def ensure_features(
    g: HeterogeneousGraph, identity_cap: int = 10_000, random_dim: int = 64, seed: int = 0
) -> HeterogeneousGraph:
    """Give every featureless type synthetic features.

    Types with at most `identity_cap` nodes get one-hot identity features, which are kept
    implicit (``features[t] is None`` with ``feature_kind == "identity"``); larger types get
    seeded standard-normal features of width `random_dim`.
    """
    node_types, features = [], []
    for t, x in zip(g.node_types, g.features):
        if t.feature_kind == "raw" and t.feature_dim > 0 and x is not None:
            node_types.append(t)
            features.append(x)
        elif t.count <= identity_cap:
            node_types.append(NodeType(t.id, t.name, t.count, t.count, "identity"))
            features.append(None)
        else:
            rng = np.random.default_rng([seed, t.id])
            node_types.append(NodeType(t.id, t.name, t.count, random_dim, "random"))
            features.append(rng.standard_normal((t.count, random_dim)))
    return HeterogeneousGraph(node_types, g.edge_types, g.adjacency, features, g.labels, g.splits)


def node_offsets(g: HeterogeneousGraph) -> np.ndarray:
    """Start of each type's block in the global node numbering (types in id order)."""
    return np.concatenate([[0], np.cumsum([t.count for t in g.node_types])]).astype(np.int64)
