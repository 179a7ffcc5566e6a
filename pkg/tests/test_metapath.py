import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hagnn.hetgraph import EdgeType, GraphError, HeterogeneousGraph, MetaPath, NodeType, SparseAdjacency
from hagnn.metapath import (
    MetaPathGraph,
    build_metapath_graph,
    fuse_metapath_graphs,
    information_redundancy,
    parse_metapath,
    reduction_report,
    relation_strength,
    resolve_catalog,
    select_types,
)
from hagnn.sparse import CountOverflowError, DensificationError, chain_product, spgemm
from hagnn.synthetic import random_closed_metapath, random_hetgraph, toy_author_paper

from oracles import brute_force_path_counts


def mpg(entries, n=5, t=0, seq=(0,)):
    return MetaPathGraph(t, MetaPath(seq), SparseAdjacency.from_entries(n, n, entries))


# -- sparse products ------------------------------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
def test_spgemm_matches_naive_matmul(n, k, m, seed, density):
    rng = np.random.default_rng(seed)
    a = (rng.random((n, k)) < density) * rng.integers(1, 6, size=(n, k))
    b = (rng.random((k, m)) < density) * rng.integers(1, 6, size=(k, m))
    naive = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            naive[i, j] = sum(int(a[i, x]) * int(b[x, j]) for x in range(k))
    c = spgemm(SparseAdjacency.from_dense(a), SparseAdjacency.from_dense(b))
    np.testing.assert_array_equal(c.to_dense(), naive)
    keys = c.row * m + c.col
    assert np.all(np.diff(keys) > 0) and np.all(c.weight > 0)


def test_spgemm_sparse_accumulator_path():
    # wide output with few products per row takes the sort-and-reduce branch
    a = SparseAdjacency.from_entries(2, 3, [(0, 0, 1), (0, 1, 2), (1, 2, 1)])
    b = SparseAdjacency.from_entries(3, 1000, [(0, 999, 3), (1, 999, 1), (1, 5, 1), (2, 0, 7)])
    c = spgemm(a, b)
    assert c.entries() == [(0, 5, 2), (0, 999, 5), (1, 0, 7)]


def test_count_overflow_is_detected():
    big = 2**40
    a = SparseAdjacency.from_entries(1, 1, [(0, 0, big)])
    with pytest.raises(CountOverflowError):
        spgemm(a, a)


def test_chain_order_does_not_change_result():
    rng = np.random.default_rng(0)
    mats = [SparseAdjacency.from_dense((rng.random(s) < 0.3) * 1) for s in [(6, 40), (40, 3), (3, 40), (40, 6)]]
    dense = mats[0].to_dense() @ mats[1].to_dense() @ mats[2].to_dense() @ mats[3].to_dense()
    np.testing.assert_array_equal(chain_product(mats).to_dense(), dense)


def test_densification_limit_names_the_hop():
    g = toy_author_paper()
    with pytest.raises(DensificationError, match="densification limit exceeded at A-P-P-A"):
        build_metapath_graph(g, MetaPath((0, 1)), max_nnz=2)


# -- meta-path graphs -----------------------------------------------------------------------------


def test_toy_author_paper_counts():
    g = toy_author_paper()
    m = build_metapath_graph(g, parse_metapath(g, "A-P-A"))
    expected = {(0, 1): 1, (1, 0): 1, (1, 2): 1, (2, 1): 1, (0, 0): 1, (1, 1): 2, (2, 2): 1}
    assert {(r, c): w for r, c, w in m.adjacency.entries()} == expected
    assert m.adjacency.is_symmetric()


def test_exclude_diagonal_flag():
    g = toy_author_paper()
    m = build_metapath_graph(g, MetaPath((0, 1)), include_diagonal=False)
    assert all(r != c for r, c, _ in m.adjacency.entries()) and m.num_edges == 4


def test_empty_relation_gives_empty_graph():
    g = toy_author_paper()
    g.adjacency[0] = SparseAdjacency.empty(3, 2)
    assert build_metapath_graph(g, MetaPath((0, 1))).num_edges == 0


def test_non_composable_path():
    g = toy_author_paper()
    with pytest.raises(GraphError, match="meta-path not composable"):
        build_metapath_graph(g, MetaPath((0, 0)))
    with pytest.raises(GraphError, match="meta-path not composable"):
        build_metapath_graph(g, MetaPath((0,)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_paths_match_dfs(seed):
    rng = np.random.default_rng(seed)
    g = random_hetgraph(rng)
    p = random_closed_metapath(g, rng)
    if p is None:
        return
    m = build_metapath_graph(g, p, max_nnz=None)
    head = g.edge_types[p.edge_type_sequence[0]].src_type
    want = brute_force_path_counts([a.entries() for a in g.adjacency], p.edge_type_sequence, g.node_types[head].count)
    assert {(r, c): w for r, c, w in m.adjacency.entries()} == {k: v for k, v in want.items() if v}


def test_parse_forms_and_errors():
    g = toy_author_paper()
    assert parse_metapath(g, "A-P-A").edge_type_sequence == (0, 1)
    assert parse_metapath(g, "[A-P, P-A]").edge_type_sequence == (0, 1)
    with pytest.raises(GraphError, match="no relation"):
        parse_metapath(g, "A-A")
    nts = g.node_types
    ets = g.edge_types + [EdgeType(2, "cites", 0, 1)]
    g2 = HeterogeneousGraph(nts, ets, g.adjacency + [g.adjacency[0]], g.features)
    with pytest.raises(GraphError, match="ambiguous hop"):
        parse_metapath(g2, "A-P-A")
    assert parse_metapath(g2, "[cites, P-A]").edge_type_sequence == (2, 1)


def test_resolve_catalog_rejects_foreign_head():
    g = toy_author_paper()
    with pytest.raises(GraphError):
        resolve_catalog(g, {"P": ["A-P-A"]})


# -- type selection -------------------------------------------------------------------------------


def dblp_shaped():
    nts = [NodeType(0, "Author", 4057, 0), NodeType(1, "Paper", 14328, 0), NodeType(2, "Conference", 20, 0)]
    ets = [EdgeType(0, "AP", 0, 1), EdgeType(1, "PA", 1, 0), EdgeType(2, "PC", 1, 2), EdgeType(3, "CP", 2, 1)]
    adj = [SparseAdjacency.empty(nts[e.src_type].count, nts[e.dst_type].count) for e in ets]
    return HeterogeneousGraph(nts, ets, adj, [None] * 3)


def test_select_types_dblp_counts():
    g = dblp_shaped()
    catalog = {0: [MetaPath((0, 1))], 1: [MetaPath((1, 0))], 2: [MetaPath((3, 2))]}
    assert select_types(g, 0.01, catalog) == {0, 1}


def test_select_types_trivial_cases():
    g = dblp_shaped()
    assert select_types(g, 0.0, {}) == set()
    g2 = toy_author_paper()  # 3 vs 2 nodes: no majority above 0.6
    assert select_types(g2, 0.6, {0: [MetaPath((0, 1))], 1: [MetaPath((1, 0))]}) == set()
    with pytest.raises(ValueError):
        select_types(g, 1.0, {})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 0.99), st.floats(0, 0.99))
def test_select_types_monotone(seed, t1, t2):
    rng = np.random.default_rng(seed)
    g = random_hetgraph(rng)
    catalog = {}
    for _ in range(6):
        p = random_closed_metapath(g, rng)
        if p is not None:
            catalog.setdefault(g.metapath_head(p), []).append(p)
    lo, hi = sorted((t1, t2))
    assert select_types(g, hi, catalog) <= select_types(g, lo, catalog)


# -- fusion, redundancy, reduction ----------------------------------------------------------------


def test_fuse_single_is_identity():
    m = mpg([(0, 1, 2), (3, 3, 1)])
    f = fuse_metapath_graphs([m])
    assert f.adjacency == m.adjacency


def test_fuse_hand_example():
    f = fuse_metapath_graphs([mpg([(0, 1, 1)]), mpg([(0, 1, 1), (1, 2, 1)], seq=(1,))])
    assert f.adjacency.entries() == [(0, 1, 2), (1, 2, 1)]


def test_fuse_type_mismatch():
    with pytest.raises(GraphError, match="type mismatch in fusion"):
        fuse_metapath_graphs([mpg([(0, 1, 1)]), mpg([(0, 1, 1)], t=1)])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fusion_order_independent_and_superset(seed):
    rng = np.random.default_rng(seed)
    graphs = []
    for k in range(int(rng.integers(1, 5))):
        dense = (rng.random((7, 7)) < 0.3) * rng.integers(1, 4, size=(7, 7))
        graphs.append(MetaPathGraph(0, MetaPath((k,)), SparseAdjacency.from_dense(dense)))
    f = fuse_metapath_graphs(graphs)
    perm = [graphs[i] for i in rng.permutation(len(graphs))]
    g2 = fuse_metapath_graphs(perm)
    assert f.adjacency == g2.adjacency and f.meta_paths == g2.meta_paths
    for m in graphs:
        assert m.adjacency.edge_set() <= f.adjacency.edge_set()
    np.testing.assert_array_equal(f.adjacency.to_dense(), sum(m.adjacency.to_dense() for m in graphs))
    assert f.num_edges <= sum(m.num_edges for m in graphs)
    assert np.all(f.adjacency.weight >= 1)


def test_redundancy_examples():
    a = mpg([(0, 1, 1), (1, 2, 1)])
    b = mpg([(1, 2, 1), (2, 3, 1), (3, 4, 1)])
    assert information_redundancy(a, b) == (0.25, 0.5)
    assert information_redundancy(a, a) == (1.0, 1.0)
    assert information_redundancy(a, mpg([(4, 4, 1)])) == (0.0, 0.0)
    with pytest.raises(GraphError, match="undefined redundancy"):
        information_redundancy(mpg([]), mpg([]))


@settings(max_examples=80, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=20),
       st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=20))
def test_redundancy_symmetric_and_matches_sets(ea, eb):
    a, b = mpg([(r, c, 1) for r, c in ea], n=6), mpg([(r, c, 1) for r, c in eb], n=6)
    assert information_redundancy(a, b) == information_redundancy(b, a)
    jac, con = information_redundancy(a, b)
    assert jac == pytest.approx(len(ea & eb) / len(ea | eb))
    assert con == pytest.approx(len(ea & eb) / min(len(ea), len(eb)) if min(len(ea), len(eb)) else 0.0)


def test_reduction_examples():
    a, b = mpg([(0, 1, 1)]), mpg([(2, 3, 1)], seq=(1,))
    stats = reduction_report([a, b], fuse_metapath_graphs([a, b]))
    assert (stats.member_edges, stats.fused_edges, stats.reduction_rate) == (2, 2, 0.0)
    single = reduction_report([a], fuse_metapath_graphs([a]))
    assert single.reduction_rate == 0.0
    assert stats.as_dict()["reduction_percent"] == 0.0


def test_reduction_percent_rounding_matches_published_figures():
    from hagnn.metapath import ReductionStats

    assert ReductionStats(12055180, 7043572).as_dict()["reduction_percent"] == 41.57
    assert ReductionStats(172478, 138272).as_dict()["reduction_percent"] == 19.83
    assert ReductionStats(164482286, 109146782).as_dict()["reduction_percent"] == 33.64


def test_relation_strength():
    assert relation_strength(mpg([(i, i, 1) for i in range(5)])) == "strong"
    dense = MetaPathGraph(0, MetaPath((0,)), SparseAdjacency.from_dense(np.ones((20, 20), dtype=int)))
    assert relation_strength(dense) == "weak"
