"""HAGNN: structural-semantic intra-type attention on fused graphs, multi-head inter-type attention
on the original graph, and a combine step."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from hagnn import autodiff as ad
from hagnn.autodiff import Tensor
from hagnn.hetgraph import GraphError, HeterogeneousGraph, node_offsets
from hagnn.metapath import FusedMetaPathGraph
from hagnn.structsem import PER_TARGET, StructuralWeights, normalize_structural_weights


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 64
    num_heads: int = 2
    intra_layers: int = 2
    inter_layers: int = 2
    beta: float = 0.3
    activation: str = "elu"
    negative_slope: float = 0.05
    combine: str = "concat"
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.activation not in ("elu", "relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.combine not in ("concat", "add"):
            raise ValueError(f"unknown combine mode {self.combine!r}")
        if min(self.hidden_dim, self.num_heads) < 1 or min(self.intra_layers, self.inter_layers) < 0:
            raise ValueError("hidden_dim and num_heads must be >= 1, layer counts >= 0")

    @property
    def embedding_dim(self) -> int:
        return 2 * self.hidden_dim if self.combine == "concat" else self.hidden_dim

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class IntraEdges:
    """Fused-graph edges of one node type, sorted by target node (dst, then src)."""

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    delta: np.ndarray
    has_neighbors: np.ndarray


@dataclass
class GraphStructure:
    """Everything the forward pass needs from the graph, as plain index arrays."""

    type_counts: list[int]
    offsets: np.ndarray
    intra: dict[int, IntraEdges]
    inter_src: np.ndarray
    inter_dst: np.ndarray
    feature_kinds: list[str]
    features: list[np.ndarray | None]
    feature_dims: list[int]

    @property
    def num_nodes(self) -> int:
        return int(self.offsets[-1])


def intra_edges_from_weights(fused: FusedMetaPathGraph, sw: StructuralWeights) -> IntraEdges:
    a = fused.adjacency
    if not (np.array_equal(sw.src, a.row) and np.array_equal(sw.dst, a.col)):
        raise GraphError(f"structural weight support does not match the fused graph of type {fused.node_type}")
    order = np.lexsort((sw.src, sw.dst))
    dst = sw.dst[order]
    has = np.zeros(a.cols, dtype=bool)
    has[dst] = True
    return IntraEdges(a.cols, sw.src[order], dst, sw.weights[order], has)


def pooled_edges(g: HeterogeneousGraph) -> tuple[np.ndarray, np.ndarray]:
    """Union of all relations in global ids plus a self-loop per node, sorted by (dst, src)."""
    off = node_offsets(g)
    n = int(off[-1])
    srcs, dsts = [np.arange(n)], [np.arange(n)]
    for e, a in zip(g.edge_types, g.adjacency):
        srcs.append(a.row + off[e.src_type])
        dsts.append(a.col + off[e.dst_type])
    src, dst = np.concatenate(srcs), np.concatenate(dsts)
    key = np.unique(dst * n + src)
    return key % n, key // n


def prepare_structure(
    g: HeterogeneousGraph,
    fused: Mapping[int, FusedMetaPathGraph] | None = None,
    weights: Mapping[int, StructuralWeights] | None = None,
    mode: str = PER_TARGET,
) -> GraphStructure:
    fused = dict(fused or {})
    weights = dict(weights or {})
    intra = {}
    for t, f in sorted(fused.items()):
        sw = weights.get(t) or normalize_structural_weights(f, mode)
        intra[t] = intra_edges_from_weights(f, sw)
    src, dst = pooled_edges(g)
    return GraphStructure(
        type_counts=[t.count for t in g.node_types],
        offsets=node_offsets(g),
        intra=intra,
        inter_src=src,
        inter_dst=dst,
        feature_kinds=[t.feature_kind for t in g.node_types],
        features=list(g.features),
        feature_dims=[t.feature_dim for t in g.node_types],
    )


# -- parameters ---------------------------------------------------------------------------------


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(
    structure: GraphStructure,
    config: ModelConfig,
    *,
    num_classes: int | None = None,
    link_relations: Sequence[str] = (),
    seed: int = 0,
) -> dict[str, Tensor]:
    """Deterministic Glorot-uniform parameters, keyed by block name (insertion order is stable)."""
    rng = np.random.default_rng(seed)
    d, k = config.hidden_dim, config.num_heads
    p: dict[str, Tensor] = {}

    def new(name, fan_in, fan_out):
        p[name] = ad.parameter(glorot(rng, fan_in, fan_out), name)

    for t, dim in enumerate(structure.feature_dims):
        new(f"proj.{t}", dim, d)
    for layer in range(config.intra_layers):
        for t in sorted(structure.intra):
            new(f"intra.{layer}.{t}.W", d, d)
            new(f"intra.{layer}.{t}.att_dst", d, 1)
            new(f"intra.{layer}.{t}.att_src", d, 1)
    for layer in range(config.inter_layers):
        for h in range(k):
            new(f"inter.{layer}.{h}.W", d, d)
            new(f"inter.{layer}.{h}.att_dst", d, 1)
            new(f"inter.{layer}.{h}.att_src", d, 1)
    new("combine.W_m", k * d, d)
    out = config.embedding_dim
    if num_classes:
        new("head.nc", out, num_classes)
    for r in link_relations:
        new(f"head.lp.{r}", out, out)
    return p


def param_shapes(params: Mapping[str, Tensor]) -> dict[str, tuple[int, ...]]:
    return {name: tuple(t.shape) for name, t in params.items()}


# -- layers -------------------------------------------------------------------------------------


def activate(x: Tensor, kind: str) -> Tensor:
    if kind == "elu":
        return ad.elu(x)
    if kind == "relu":
        return ad.relu(x)
    return x


def project_features(structure: GraphStructure, params: Mapping[str, Tensor]) -> list[Tensor]:
    """Type-specific linear map of raw features into the shared hidden space."""
    out = []
    for t, (kind, x) in enumerate(zip(structure.feature_kinds, structure.features)):
        w = params[f"proj.{t}"]
        if kind == "identity":
            # one-hot features: the projection of node v is row v of the weight
            if w.shape[0] != structure.type_counts[t]:
                raise ad.ShapeError(f"project_features: type {t} weight {w.shape} vs {structure.type_counts[t]} nodes")
            out.append(w)
            continue
        if x is None or x.shape[1] != w.shape[0]:
            got = None if x is None else x.shape
            raise ad.ShapeError(f"project_features: type {t} features {got} do not match weight {w.shape}")
        out.append(ad.matmul(Tensor(x), w))
    return out


def attention_logits(h: Tensor, w: Tensor, att_dst: Tensor, att_src: Tensor, src, dst, slope: float) -> Tensor:
    """LeakyReLU(a . [W h_dst || W h_src]) per edge, with a = [att_dst; att_src]."""
    wh = ad.matmul(h, w)
    n = h.shape[0]
    s_dst = ad.reshape(ad.matmul(wh, att_dst), (n,))
    s_src = ad.reshape(ad.matmul(wh, att_src), (n,))
    return ad.leaky_relu(ad.add(ad.gather_rows(s_dst, dst), ad.gather_rows(s_src, src)), slope)


def intra_attention(h: Tensor, edges: IntraEdges, params, prefix: str, beta: float, slope: float):
    """(alpha, eta) edge weights for one intra layer; eta mixes learned and structural weights."""
    e = attention_logits(
        h, params[f"{prefix}.W"], params[f"{prefix}.att_dst"], params[f"{prefix}.att_src"], edges.src, edges.dst, slope
    )
    alpha = ad.segment_softmax(e, edges.dst, edges.num_nodes)
    eta = ad.add(ad.scale(alpha, 1.0 - beta), Tensor(beta * edges.delta))
    return alpha, eta


def intra_layer(h: Tensor, edges: IntraEdges, params, prefix: str, config: ModelConfig) -> Tensor:
    _, eta = intra_attention(h, edges, params, prefix, config.beta, config.negative_slope)
    agg = ad.segment_weighted_sum(ad.gather_rows(h, edges.src), eta, edges.dst, edges.num_nodes)
    out = activate(agg, config.activation)
    if edges.has_neighbors.all():
        return out
    # nodes without fused-graph neighbours keep their input vector
    keep = np.repeat(edges.has_neighbors[:, None].astype(float), h.shape[1], axis=1)
    return ad.add(ad.mul(out, Tensor(keep)), ad.mul(h, Tensor(1.0 - keep)))


def inter_head(h: Tensor, structure: GraphStructure, params, prefix: str, slope: float):
    """One attention head over pooled immediate neighbours: (aggregated output, alpha)."""
    src, dst = structure.inter_src, structure.inter_dst
    e = attention_logits(h, params[f"{prefix}.W"], params[f"{prefix}.att_dst"], params[f"{prefix}.att_src"], src, dst, slope)
    alpha = ad.segment_softmax(e, dst, structure.num_nodes)
    return ad.segment_weighted_sum(ad.gather_rows(h, src), alpha, dst, structure.num_nodes), alpha


def inter_layer(h: Tensor, structure: GraphStructure, params, layer: int, config: ModelConfig, last: bool) -> Tensor:
    heads = [inter_head(h, structure, params, f"inter.{layer}.{k}", config.negative_slope)[0]
             for k in range(config.num_heads)]
    if last:
        return ad.concat(heads, axis=1) if len(heads) > 1 else heads[0]
    # hidden layers average heads so every layer consumes width d
    acc = heads[0]
    for x in heads[1:]:
        acc = ad.add(acc, x)
    return ad.scale(acc, 1.0 / len(heads))


def combine(h_intra: Tensor, h_inter: Tensor, w_m: Tensor, mode: str = "concat") -> Tensor:
    mapped = ad.matmul(h_inter, w_m)
    if mode == "concat":
        return ad.concat([h_intra, mapped], axis=1)
    return ad.add(h_intra, mapped)


@dataclass
class ForwardResult:
    embeddings: dict[int, Tensor]
    h_intra: Tensor
    h_inter: Tensor | None
    extras: dict = field(default_factory=dict)


def forward(
    structure: GraphStructure,
    params: Mapping[str, Tensor],
    config: ModelConfig,
    target_types: Sequence[int],
    *,
    dropout_rng: np.random.Generator | None = None,
) -> ForwardResult:
    """Projection, L_intra intra layers, L_inter inter layers, then combine for each target type."""
    hidden = project_features(structure, params)
    if config.dropout > 0 and dropout_rng is not None:
        keep = 1.0 - config.dropout
        hidden = [ad.mul(x, Tensor((dropout_rng.random(x.shape) < keep) / keep)) for x in hidden]
    for layer in range(config.intra_layers):
        hidden = [
            intra_layer(x, structure.intra[t], params, f"intra.{layer}.{t}", config) if t in structure.intra else x
            for t, x in enumerate(hidden)
        ]
    h_intra = ad.concat(hidden, axis=0) if len(hidden) > 1 else hidden[0]
    h = h_intra
    for layer in range(config.inter_layers):
        h = inter_layer(h, structure, params, layer, config, last=layer == config.inter_layers - 1)
    h_inter = h if config.inter_layers else None
    inter_in = h if h_inter is not None else Tensor(np.zeros((structure.num_nodes, config.num_heads * config.hidden_dim)))
    out = {}
    for t in target_types:
        idx = np.arange(structure.offsets[t], structure.offsets[t + 1])
        out[t] = combine(ad.gather_rows(h_intra, idx), ad.gather_rows(inter_in, idx), params["combine.W_m"], config.combine)
    return ForwardResult(out, h_intra, h_inter)


def node_logits(z: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    return ad.matmul(z, params["head.nc"])


def link_logits(z_src: Tensor, z_dst: Tensor, w_r: Tensor, src, dst) -> Tensor:
    """z_v^T W_r z_u for each pair (u=src, v=dst), before the sigmoid."""
    zu = ad.gather_rows(z_src, src)
    zv = ad.gather_rows(z_dst, dst)
    return ad.sum(ad.mul(ad.matmul(zv, w_r), zu), axis=1)
