import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrgraph.dendrogram import (
    Dendrogram,
    DendrogramFormatError,
    balanced_dendrogram,
    compute_stats,
    connection_matrix,
    deserialize,
    double_factorial,
    entropy,
    enumerate_dendrograms,
    lca_matrix,
    likelihood_product,
    log_likelihood,
    lowest_common_ancestor,
    planted_dendrogram,
    random_dendrogram,
    serialize,
    to_table,
)
from hrgraph.graph import Graph, generate_er_graph

# two triangles joined by the edge 2-3
TWO_TRIANGLES = Graph(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)])
D1 = ((0, 1), (2, (3, (4, 5))))
D2 = ((0, (1, 2)), (3, (4, 5)))


def fitted(nested, g):
    return compute_stats(Dendrogram.from_nested(nested), g)


def slow_log_likelihood(d, g):
    """Independent oracle: enumerate every pair and its LCA by leaf sets."""
    leafsets = {r: set(d.leaves_under(r)) for r in d.internal_nodes()}
    e = {r: 0 for r in leafsets}
    tot = {r: 0 for r in leafsets}
    for i in range(g.n):
        for j in range(i + 1, g.n):
            r = min((r for r, s in leafsets.items() if i in s and j in s), key=lambda r: len(leafsets[r]))
            tot[r] += 1
            e[r] += g.has_edge(i, j)
    out = 0.0
    for r in leafsets:
        p = e[r] / tot[r]
        if 0 < p < 1:
            out += e[r] * math.log(p) + (tot[r] - e[r]) * math.log(1 - p)
    return out


def test_two_triangles_likelihoods():
    l1 = likelihood_product(fitted(D1, TWO_TRIANGLES))
    l2 = likelihood_product(fitted(D2, TWO_TRIANGLES))
    expected1 = (1 / 3) * (2 / 3) ** 2 * (1 / 4) ** 2 * (3 / 4) ** 6
    expected2 = (1 / 9) * (8 / 9) ** 8
    assert l1 == pytest.approx(expected1, rel=1e-12)
    assert l1 == pytest.approx(0.00164794921875, rel=1e-12)
    assert l2 == pytest.approx(expected2, rel=1e-12)
    assert l2 == pytest.approx(0.0433049, abs=1e-7)


@pytest.mark.parametrize("nested", [D1, D2])
def test_log_and_product_forms_agree(nested):
    d = fitted(nested, TWO_TRIANGLES)
    assert math.exp(log_likelihood(d)) == pytest.approx(likelihood_product(d), rel=1e-12)


def test_complete_graph_has_zero_loglik():
    g = Graph(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])
    d = compute_stats(random_dendrogram(5, 3), g)
    assert log_likelihood(d) == 0.0
    assert np.all(d.prob == 1.0)


def test_empty_graph_has_zero_loglik():
    d = compute_stats(random_dendrogram(5, 3), Graph(5))
    assert log_likelihood(d) == 0.0
    assert np.all(d.prob == 0.0)


def test_two_vertices():
    d = Dendrogram.from_nested((0, 1))
    for g, p in ((Graph(2, [(0, 1)]), 1.0), (Graph(2), 0.0)):
        compute_stats(d, g)
        assert d.prob[0] == p
        assert log_likelihood(d) == 0.0


def test_three_way_equal_split():
    # three triangles, one edge between every pair of triangles
    edges = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (6, 7), (6, 8), (7, 8), (0, 3), (4, 6), (8, 1)]
    g = Graph(9, edges)
    a, b, c = ((0, 1), 2), ((3, 4), 5), ((6, 7), 8)
    vals = [log_likelihood(fitted(t, g)) for t in (((a, b), c), ((a, c), b), ((b, c), a))]
    assert vals[1] == pytest.approx(vals[0], rel=1e-12, abs=0)
    assert vals[2] == pytest.approx(vals[0], rel=1e-12, abs=0)


@given(st.tuples(st.integers(2, 9), st.floats(0, 1), st.integers(0, 10**6)))
@settings(max_examples=60, deadline=None)
def test_loglik_bounds_and_product_identity(params):
    n, p, seed = params
    g = generate_er_graph(n, p, seed)
    d = compute_stats(random_dendrogram(n, seed), g)
    ll = log_likelihood(d)
    assert -n * (n - 1) / 2 * math.log(2) - 1e-12 <= ll <= 0
    assert math.exp(ll) == pytest.approx(likelihood_product(d), rel=1e-12)
    # the general likelihood at p = p-bar agrees with the profile form
    assert likelihood_product(d, prob=d.edge_counts / d.pair_counts()) == likelihood_product(d)


def test_entropy_bounds():
    p = np.linspace(0, 1, 101)
    h = entropy(p)
    assert h[0] == 0 and h[-1] == 0
    assert np.all(h >= 0) and np.all(h <= math.log(2) + 1e-15)
    assert entropy(np.array([0.5]))[0] == pytest.approx(math.log(2))


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
def test_enumeration_count(n):
    trees = enumerate_dendrograms(n)
    assert len(trees) == double_factorial(2 * n - 3)
    assert len({t.topology_key() for t in trees}) == len(trees)


def test_enumeration_limit():
    with pytest.raises(ValueError):
        enumerate_dendrograms(8)


graphs = st.integers(3, 14).flatmap(
    lambda n: st.tuples(st.just(n), st.floats(0, 1), st.integers(0, 10**6))
)


@given(graphs)
@settings(max_examples=60, deadline=None)
def test_pair_and_edge_invariants(params):
    n, p, seed = params
    g = generate_er_graph(n, p, seed)
    d = compute_stats(random_dendrogram(n, seed + 1), g)
    d.validate()
    assert d.pair_counts().sum() == n * (n - 1) // 2
    assert d.edge_counts.sum() == g.m
    assert np.all(d.edge_counts <= d.pair_counts())
    assert np.all((0 <= d.prob) & (d.prob <= 1))
    ll = log_likelihood(d)
    assert ll <= 0
    assert ll == pytest.approx(slow_log_likelihood(d, g), abs=1e-9)


@given(graphs)
@settings(max_examples=40, deadline=None)
def test_connection_and_lca_matrices(params):
    n, p, seed = params
    g = generate_er_graph(n, p, seed)
    d = compute_stats(random_dendrogram(n, seed), g)
    P = connection_matrix(d)
    M = lca_matrix(d)
    assert np.allclose(P, P.T) and np.all(np.diag(P) == 0)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        i, j = rng.choice(n, 2, replace=False)
        r = lowest_common_ancestor(d, i, j)
        assert M[i, j] == r
        assert P[i, j] == d.prob[r - n]
        assert i in d.leaves_under(r) and j in d.leaves_under(r)


@given(graphs)
@settings(max_examples=60, deadline=None)
def test_serialize_roundtrip(params):
    n, p, seed = params
    g = generate_er_graph(n, p, seed)
    d = compute_stats(random_dendrogram(n, seed), g)
    text = serialize(d)
    back, ll = deserialize(text)
    assert back == d
    assert ll == log_likelihood(d)

    def by_cluster(t):
        return {m: (int(t.edge_counts[r - n]), float(t.prob[r - n])) for r, m in t.cluster_masks().items()}

    assert by_cluster(back) == by_cluster(d)
    assert serialize(back, log_l=ll) == text


def test_serialize_format():
    d = compute_stats(Dendrogram.from_nested((0, 1)), Graph(2, [(0, 1)]))
    assert serialize(d) == "#HRG n=2 logL=0\n((0,1):1)\n"


@pytest.mark.parametrize(
    "text, pos",
    [
        ("#HRG n=3 logL=0\n(((0,1):1,2):0.5\n", None),
        ("#HRG n=3 logL=0\n(((0,1),2):0.5)\n", 7),
        ("#HRG n=3 logL=0\n(((0,1):1,x):0.5)\n", 10),
        ("#HRG n=3 logL=0\n(((0,1):1,2):0.5)x\n", None),
    ],
)
def test_deserialize_errors(text, pos):
    with pytest.raises(DendrogramFormatError) as err:
        deserialize(text)
    if pos is not None:
        assert err.value.pos == pos


def test_deserialize_leaf_count_mismatch():
    with pytest.raises(DendrogramFormatError):
        deserialize("#HRG n=4 logL=0\n(((0,1):1,2):0.5)\n")


def test_deserialize_bad_header():
    with pytest.raises(DendrogramFormatError):
        deserialize("HRG 3\n(((0,1):1,2):0.5)\n")


def test_deep_caterpillar_roundtrip():
    n = 3000
    nested = 0
    for v in range(1, n):
        nested = (nested, v)
    d = Dendrogram.from_nested(nested)
    assert d.depth(0) == n - 1
    back, _ = deserialize(serialize(d, log_l=0.0))
    assert back == d


def test_from_nested_rejects_bad_leaves():
    with pytest.raises(ValueError):
        Dendrogram.from_nested(((0, 1), 3))
    with pytest.raises(ValueError):
        Dendrogram.from_nested(((0, 1), 1))


def test_lca_rejects_same_vertex():
    d = balanced_dendrogram(4)
    with pytest.raises(ValueError):
        lowest_common_ancestor(d, 1, 1)


def test_table():
    d = fitted(((0, 1), 2), Graph(3, [(0, 1)]))
    rows = to_table(d)
    assert rows[0] == (0, "v0", "v1", 1.0)
    assert rows[1] == (1, "0", "v2", 0.0)


def test_balanced_and_planted():
    d = planted_dendrogram(8, [0.1, 0.5, 0.9])
    assert d.size[d.root] == 8
    assert d.prob[d.root - 8] == 0.1
    assert sorted(d.prob.tolist()) == [0.1, 0.5, 0.5, 0.9, 0.9, 0.9, 0.9]
    assert not d.has_stats


@pytest.mark.parametrize("n", [2, 3, 10, 57])
def test_random_dendrogram_valid_and_seeded(n):
    d = random_dendrogram(n, 5)
    d.validate()
    assert d == random_dendrogram(n, 5)
    assert sorted(d.leaves_under(d.root)) == list(range(n))


def test_random_dendrogram_n3_frequencies():
    keys = [random_dendrogram(3, s).topology_key() for s in range(10_000)]
    counts = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    assert len(counts) == 3
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 3) < 0.02


def test_random_dendrogram_n4_reaches_all_topologies():
    assert len({random_dendrogram(4, s).topology_key() for s in range(2000)}) == 15


def test_random_dendrogram_rejects_n1():
    with pytest.raises(ValueError):
        random_dendrogram(1, 0)


def test_two_triangles_root_stats():
    d = fitted(D2, TWO_TRIANGLES)
    assert d.node_stats(d.root) == (1, 3, 3, 1 / 9)
    from hrgraph.dendrogram import connection_probability

    assert connection_probability(d, 0, 4) == 1 / 9
    assert connection_probability(d, 1, 2) == 1.0


def test_compute_stats_complete_graph_k4():
    g = Graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    for t in enumerate_dendrograms(4):
        assert np.all(compute_stats(t, g).prob == 1.0)


def test_compute_stats_rejects_mismatch():
    with pytest.raises(ValueError):
        compute_stats(random_dendrogram(4, 0), Graph(5))


def test_lca_examples():
    assert lowest_common_ancestor(Dendrogram.from_nested((0, 1)), 0, 1) == 2
    d = Dendrogram.from_nested(D2)
    r = lowest_common_ancestor(d, 1, 2)
    assert r != d.root and set(d.leaves_under(r)) == {1, 2}
    assert lowest_common_ancestor(d, 0, 1) != d.root
    caterpillar = Dendrogram.from_nested((((0, 1), 2), 3))
    assert caterpillar.size[lowest_common_ancestor(caterpillar, 0, 1)] == 2
