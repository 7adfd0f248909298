import numpy as np
import pytest
from hypothesis import given, strategies as st

from girgdiam.errors import InvalidInputError
from girgdiam.geometry import ModelParams
from girgdiam.graph import (INF, Graph, bfs_distances, bounded_distance, components, power_distance,
                            shortest_path)
from girgdiam.sampler import sample_graph
from oracles import adjacency_lists, queue_bfs, uf_partition


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def random_graph(rng, n, m):
    e = rng.integers(0, n, size=(m, 2))
    return Graph.from_edges(n, e[e[:, 0] != e[:, 1]]), e[e[:, 0] != e[:, 1]]


def test_bfs_examples():
    assert bfs_distances(path(3), 0).tolist() == [0, 1, 2]
    d = bfs_distances(Graph.from_edges(3, [(1, 2)]), 0)
    assert d[0] == 0 and d[1] == INF and d[2] == INF
    cyc = Graph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    assert bfs_distances(cyc, 3).max() == 2


def test_bfs_invalid_source():
    with pytest.raises(InvalidInputError):
        bfs_distances(path(3), 3)


def test_components_examples():
    c = components(Graph.from_edges(4, [(0, 1), (2, 3)]))
    assert c.count == 2 and sorted(c.sizes.tolist()) == [2, 2]
    assert components(Graph.from_edges(0, [])).count == 0
    k4 = Graph.from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    c = components(k4)
    assert c.count == 1 and c.sizes.tolist() == [4]


def test_components_match_union_find():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 60))
        g, e = random_graph(rng, n, int(rng.integers(0, 2 * n)))
        lab = components(g)
        got = sorted(tuple(np.nonzero(lab.labels == k)[0].tolist()) for k in range(lab.count))
        assert got == uf_partition(n, e)
        assert lab.sizes.sum() == n
        assert lab.sizes[lab.largest] == lab.sizes.max()


def test_bfs_matches_queue_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 80))
        g, e = random_graph(rng, n, int(rng.integers(0, 3 * n)))
        adj = adjacency_lists(n, e)
        s = int(rng.integers(n))
        ref = [INF if x < 0 else x for x in queue_bfs(n, adj, s)]
        assert bfs_distances(g, s).tolist() == ref


def test_metric_properties_on_sample():
    g = sample_graph(ModelParams(d=2, lam=1, tau=2.5, n=1024, seed=3))
    rng = np.random.default_rng(2)
    verts = rng.choice(g.num_vertices, 12, replace=False)
    dist = {int(v): bfs_distances(g, int(v)) for v in verts}
    for u in verts:
        for v in verts:
            assert dist[int(u)][v] == dist[int(v)][u]
            for w in verts:
                if dist[int(u)][v] < INF and dist[int(v)][w] < INF:
                    assert dist[int(u)][w] <= dist[int(u)][v] + dist[int(v)][w]


def test_power_distance_examples():
    g = path(8)
    assert power_distance(g, 0, 6, 3) == 2
    assert power_distance(g, 4, 4, 3) == 0
    assert power_distance(g, 0, 7, 3) == 3
    assert power_distance(Graph.from_edges(2, []), 0, 1, 2) == INF
    with pytest.raises(InvalidInputError):
        power_distance(g, 0, 1, 0)


@given(st.integers(0, 40), st.integers(1, 6))
def test_power_distance_is_ceiling(k, p):
    g = path(41)
    assert power_distance(g, 0, k, p) == -(-k // p)


def test_shortest_path_and_bounded_distance():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = int(rng.integers(2, 60))
        g, _ = random_graph(rng, n, int(rng.integers(0, 2 * n)))
        u, v = (int(x) for x in rng.integers(0, n, 2))
        ref = bfs_distances(g, u)[v]
        p = shortest_path(g, u, v)
        if ref == INF:
            assert p == []
            assert bounded_distance(g, u, v, 3) == INF
            continue
        assert len(p) - 1 == ref and p[0] == u and p[-1] == v
        assert all(g.has_edge(a, b) for a, b in zip(p, p[1:]))
        assert bounded_distance(g, u, v, 3) == (ref if ref <= 3 else INF)
