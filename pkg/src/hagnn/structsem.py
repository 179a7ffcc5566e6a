"""Structural semantic weights: softmax-normalised path-instance counts on a fused graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hagnn.hetgraph import GraphError
from hagnn.metapath import FusedMetaPathGraph

PER_TARGET = "per_target_neighborhood"
GLOBAL = "global"
MODES = (PER_TARGET, GLOBAL)


@dataclass(frozen=True)
class StructuralWeights:
    """delta_tilde per fused edge, aligned with the fused adjacency's (row=src, col=dst) entries."""

    node_type: int
    src: np.ndarray
    dst: np.ndarray
    raw: np.ndarray
    weights: np.ndarray
    normalization_mode: str

    def as_map(self) -> dict[tuple[int, int], float]:
        return dict(zip(zip(self.src.tolist(), self.dst.tolist()), self.weights.tolist()))


def normalize_structural_weights(fused: FusedMetaPathGraph, mode: str = PER_TARGET) -> StructuralWeights:
    if mode not in MODES:
        raise ValueError(f"unknown normalization mode {mode!r}; expected one of {MODES}")
    a = fused.adjacency
    if a.nnz == 0:
        raise GraphError("structural weights need a non-empty fused graph")
    raw = a.weight.astype(np.float64)
    if mode == GLOBAL:
        e = np.exp(raw - raw.max())
        w = e / e.sum()
    else:
        w = segment_softmax_np(raw, a.col, a.cols)
    return StructuralWeights(fused.node_type, a.row.copy(), a.col.copy(), a.weight.copy(), w, mode)


def segment_softmax_np(values: np.ndarray, segments: np.ndarray, num_segments: int) -> np.ndarray:
    """Softmax of `values` within groups sharing a segment id (ids need not be sorted)."""
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, segments, values)
    e = np.exp(values - seg_max[segments])
    denom = np.zeros(num_segments)
    np.add.at(denom, segments, e)
    return e / denom[segments]
