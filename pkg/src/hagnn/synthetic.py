"""Small generated datasets: the toy author-paper graph, community fixtures, the ablation set,
and random heterogeneous graphs for property tests."""

from __future__ import annotations

import numpy as np

from hagnn.hetgraph import EdgeType, HeterogeneousGraph, MetaPath, NodeType, SparseAdjacency
from hagnn.io import write_hgb


def _bipartite(name_fwd, name_rev, src, dst, n_src, n_dst, pairs, first_id):
    fwd = SparseAdjacency.from_entries(n_src, n_dst, [(a, b, 1) for a, b in pairs])
    rev = SparseAdjacency.from_entries(n_dst, n_src, [(b, a, 1) for a, b in pairs])
    return [EdgeType(first_id, name_fwd, src, dst), EdgeType(first_id + 1, name_rev, dst, src)], [fwd, rev]


def toy_author_paper() -> HeterogeneousGraph:
    """Authors A1..A3, papers P1..P2; A1-P1, A2-P1, A2-P2, A3-P2 in both directions."""
    pairs = [(0, 0), (1, 0), (1, 1), (2, 1)]
    ets, adj = _bipartite("A-P", "P-A", 0, 1, 3, 2, pairs, 0)
    nts = [NodeType(0, "A", 3, 0), NodeType(1, "P", 2, 0)]
    return HeterogeneousGraph(nts, ets, adj, [None, None])


def _stratified_masks(labels: np.ndarray, rng, ratios=(0.5, 0.25, 0.25)) -> dict[str, np.ndarray]:
    n = len(labels)
    masks = {k: np.zeros(n, dtype=bool) for k in ("train", "val", "test")}
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr = int(round(ratios[0] * len(idx)))
        n_va = int(round(ratios[1] * len(idx)))
        masks["train"][idx[:n_tr]] = True
        masks["val"][idx[n_tr:n_tr + n_va]] = True
        masks["test"][idx[n_tr + n_va:]] = True
    return masks


def community_graph(
    n_classes: int = 2,
    authors_per_class: int = 10,
    papers_per_class: int = 5,
    links_per_author: int = 2,
    feature_dim: int = 4,
    seed: int = 0,
) -> HeterogeneousGraph:
    """Two-type graph whose author class is the community of the papers it links to.

    Author features are pure noise, so the class is recoverable only through the graph.
    Papers are featureless.
    """
    rng = np.random.default_rng(seed)
    n_a, n_p = n_classes * authors_per_class, n_classes * papers_per_class
    y = np.repeat(np.arange(n_classes), authors_per_class)
    pairs = []
    for a in range(n_a):
        base = y[a] * papers_per_class
        for p in rng.choice(papers_per_class, size=min(links_per_author, papers_per_class), replace=False):
            pairs.append((a, base + int(p)))
    ets, adj = _bipartite("A-P", "P-A", 0, 1, n_a, n_p, pairs, 0)
    nts = [NodeType(0, "A", n_a, feature_dim), NodeType(1, "P", n_p, 0)]
    x = rng.standard_normal((n_a, feature_dim))
    onehot = np.eye(n_classes, dtype=np.int64)[y]
    return HeterogeneousGraph(nts, ets, adj, [x, None], {0: onehot}, {0: _stratified_masks(y, rng)})


def fixture30(seed: int = 0) -> HeterogeneousGraph:
    """30 nodes: 20 authors in two communities and 10 papers."""
    return community_graph(2, 10, 5, 2, 4, seed)


def ablation_graph(
    authors_per_class: int = 40,
    papers_per_author: int = 2,
    terms_per_community: int = 20,
    feature_dim: int = 8,
    signal: float = 0.5,
    seed: int = 0,
) -> HeterogeneousGraph:
    """Labels combine a structural bit and a neighbour-attribute bit: y = 2*s + q.

    s is the author's term community. Each author's own features carry a weak hint of s
    (`signal` against unit noise), so it is recovered reliably only by pooling authors along
    the 4-hop A-P-T-P-A meta-path. q is the one-hot feature of the author's venue, visible
    only through the immediate A-V relation. Papers and terms carry constant features.
    """
    rng = np.random.default_rng(seed)
    n_classes = 4
    n_a = n_classes * authors_per_class
    y = np.repeat(np.arange(n_classes), authors_per_class)
    s, q = y // 2, y % 2
    n_p = n_a * papers_per_author
    n_t = 2 * terms_per_community
    ap = [(a, a * papers_per_author + k) for a in range(n_a) for k in range(papers_per_author)]
    pt = [(p, int(s[p // papers_per_author]) * terms_per_community + int(rng.integers(terms_per_community)))
          for p in range(n_p)]
    av = [(a, int(q[a])) for a in range(n_a)]
    ets, adj = [], []
    for (fwd, rev, st, dt, ns, nd, pairs) in [
        ("A-P", "P-A", 0, 1, n_a, n_p, ap),
        ("P-T", "T-P", 1, 2, n_p, n_t, pt),
        ("A-V", "V-A", 0, 3, n_a, 2, av),
    ]:
        e, m = _bipartite(fwd, rev, st, dt, ns, nd, pairs, len(ets))
        ets += e
        adj += m
    x_a = rng.standard_normal((n_a, feature_dim))
    x_a[:, 0] += signal * (2 * s - 1)
    feats = [x_a, np.ones((n_p, 1)), np.ones((n_t, 1)), np.eye(2)]
    nts = [NodeType(0, "A", n_a, feature_dim), NodeType(1, "P", n_p, 1), NodeType(2, "T", n_t, 1), NodeType(3, "V", 2, 2)]
    onehot = np.eye(n_classes, dtype=np.int64)[y]
    return HeterogeneousGraph(nts, ets, adj, feats, {0: onehot}, {0: _stratified_masks(y, rng, (0.4, 0.2, 0.4))})


ABLATION_CATALOG = {"A": ["A-P-T-P-A"]}
COMMUNITY_CATALOG = {"A": ["A-P-A"]}


def random_hetgraph(rng: np.random.Generator, max_nodes: int = 50, max_types: int = 4, density: float = 0.15) -> HeterogeneousGraph:
    """Random multi-type graph with random relations (weights are small multiplicities)."""
    n_types = int(rng.integers(1, max_types + 1))
    counts = rng.multinomial(max(n_types, int(rng.integers(n_types, max_nodes + 1))) - n_types, [1 / n_types] * n_types) + 1
    nts = [NodeType(t, f"T{t}", int(c), 0) for t, c in enumerate(counts)]
    n_rel = int(rng.integers(max(1, 3 - n_types), 2 * n_types + 3))
    ets, adj = [], []
    for r in range(n_rel):
        st, dt = int(rng.integers(n_types)), int(rng.integers(n_types))
        mask = rng.random((counts[st], counts[dt])) < density
        w = mask * rng.integers(1, 3, size=mask.shape)
        ets.append(EdgeType(r, f"r{r}", st, dt))
        adj.append(SparseAdjacency.from_dense(w))
    return HeterogeneousGraph(nts, ets, adj, [None] * n_types)


def random_closed_metapath(g: HeterogeneousGraph, rng: np.random.Generator, max_len: int = 4, tries: int = 200) -> MetaPath | None:
    """Random walk over the schema that returns to its start type, or None if none was found."""
    by_src: dict[int, list[int]] = {}
    for e in g.edge_types:
        by_src.setdefault(e.src_type, []).append(e.id)
    for _ in range(tries):
        t0 = int(rng.integers(len(g.node_types)))
        t, seq = t0, []
        length = int(rng.integers(1, max_len + 1))
        for _ in range(length):
            if t not in by_src:
                break
            e = by_src[t][int(rng.integers(len(by_src[t])))]
            seq.append(e)
            t = g.edge_types[e].dst_type
        if seq and len(seq) == length and t == t0:
            return MetaPath(tuple(seq))
    return None


def write_fixture_dataset(path, seed: int = 0) -> None:
    """The bundled HGB-format fixture: three author communities over 18 papers."""
    g = community_graph(3, 20, 6, 2, 4, seed)
    # label.dat holds train+val; the loader re-divides it
    write_hgb(g, path)
