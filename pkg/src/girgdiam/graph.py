"""Immutable CSR adjacency, BFS distances, components and graph-power distances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInputError

INF = np.iinfo(np.int32).max


class Graph:
    """Undirected simple graph stored as CSR with sorted neighbour lists."""

    def __init__(self, indptr, indices):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, num_vertices: int, edges) -> "Graph":
        indptr, indices = csr_from_edges(num_vertices, edges)
        return cls(indptr, indices)

    @property
    def num_vertices(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edges(self) -> np.ndarray:
        """All edges as an (E, 2) array with u < v, sorted lexicographically."""
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int32), self.degrees())
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep]], axis=1)

    def to_scipy(self) -> csr_matrix:
        n = self.num_vertices
        data = np.ones(len(self.indices), dtype=np.int8)
        return csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def _check_vertex(self, v) -> int:
        v = int(v)
        if not 0 <= v < self.num_vertices:
            raise InvalidInputError(f"vertex id {v} out of range [0, {self.num_vertices})")
        return v


def csr_from_edges(num_vertices: int, edges, unique: bool = False):
    """Symmetric CSR arrays from an edge list.

    Self-loops and duplicate edges are dropped unless `unique` promises that
    the list holds each undirected edge once with distinct endpoints.
    """
    e = np.asarray(edges).reshape(-1, 2)
    m = int(num_vertices)
    if len(e) == 0:
        return np.zeros(m + 1, dtype=np.int64), np.empty(0, dtype=np.int32)
    if e.min() < 0 or e.max() >= m:
        raise InvalidInputError("edge endpoint out of range")
    key = np.empty(2 * len(e), dtype=np.int64)
    key[:len(e)] = e[:, 0].astype(np.int64) * m + e[:, 1]
    key[len(e):] = e[:, 1].astype(np.int64) * m + e[:, 0]
    if unique:
        key.sort()
    else:
        key = np.unique(key)
        key = key[key // m != key % m]
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(key // m, minlength=m), out=indptr[1:])
    indices = np.empty(len(key), dtype=np.int32)
    step = 1 << 22
    for s in range(0, len(key), step):
        indices[s:s + step] = key[s:s + step] % m
    return indptr, indices


def _expand(graph: Graph, frontier: np.ndarray) -> np.ndarray:
    """Concatenated neighbour lists of all frontier vertices."""
    starts = graph.indptr[frontier]
    counts = graph.indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int32)
    offs = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return graph.indices[offs + np.arange(total)]


def bfs_distances(graph: Graph, source: int, max_depth: int | None = None) -> np.ndarray:
    """Unweighted distances from `source`; unreachable vertices get INF."""
    s = graph._check_vertex(source)
    dist = np.full(graph.num_vertices, INF, dtype=np.int32)
    dist[s] = 0
    frontier = np.array([s], dtype=np.int64)
    level = 0
    while len(frontier) and (max_depth is None or level < max_depth):
        level += 1
        nb = _expand(graph, frontier)
        nb = nb[dist[nb] == INF]
        if len(nb) == 0:
            break
        nb = np.unique(nb)
        dist[nb] = level
        frontier = nb.astype(np.int64)
    return dist


def bfs_levels(graph: Graph, source: int) -> list:
    """BFS layers from `source` as a list of sorted id arrays."""
    dist = bfs_distances(graph, source)
    reach = np.nonzero(dist != INF)[0]
    order = np.argsort(dist[reach], kind="stable")
    reach = reach[order]
    bounds = np.searchsorted(dist[reach], np.arange(dist[reach][-1] + 2))
    return [reach[bounds[i]:bounds[i + 1]] for i in range(len(bounds) - 1)]


def _expand_src(graph: Graph, frontier: np.ndarray):
    """Like `_expand`, also returning which frontier vertex each neighbour came from."""
    starts = graph.indptr[frontier]
    counts = graph.indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int64)
    offs = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return graph.indices[offs + np.arange(total)], np.repeat(frontier, counts)


def shortest_path(graph: Graph, u: int, v: int) -> list:
    """One shortest u-v path (vertex list); empty list if disconnected.

    Bidirectional BFS: the smaller frontier is expanded a full level at a
    time, and on first contact the cheapest crossing edge is taken.
    """
    u, v = graph._check_vertex(u), graph._check_vertex(v)
    if u == v:
        return [u]
    n = graph.num_vertices
    dist = [np.full(n, INF, dtype=np.int32), np.full(n, INF, dtype=np.int32)]
    par = [np.full(n, -1, dtype=np.int64), np.full(n, -1, dtype=np.int64)]
    dist[0][u] = dist[1][v] = 0
    fronts = [np.array([u], dtype=np.int64), np.array([v], dtype=np.int64)]
    radius = [0, 0]
    while len(fronts[0]) and len(fronts[1]):
        side = 0 if len(fronts[0]) <= len(fronts[1]) else 1
        other = 1 - side
        nb, src = _expand_src(graph, fronts[side])
        hit = dist[other][nb] != INF
        if hit.any():
            cand = np.nonzero(hit)[0]
            k = cand[np.argmin(dist[other][nb[cand]])]
            left = [int(src[k])]
            while left[-1] != (u if side == 0 else v):
                left.append(int(par[side][left[-1]]))
            right = [int(nb[k])]
            while right[-1] != (v if side == 0 else u):
                right.append(int(par[other][right[-1]]))
            path = left[::-1] + right
            return path if side == 0 else path[::-1]
        fresh = dist[side][nb] == INF
        nb, src = nb[fresh], src[fresh]
        nb, first = np.unique(nb, return_index=True)
        if len(nb) == 0:
            return []
        radius[side] += 1
        dist[side][nb] = radius[side]
        par[side][nb] = src[first]
        fronts[side] = nb.astype(np.int64)
    return []


def bounded_distance(graph: Graph, u: int, v: int, limit: int) -> int:
    """Exact distance if it is at most `limit`, else INF.

    Grows balls from both ends alternately, so dense graphs only pay for
    radius ceil(limit/2) neighbourhoods.
    """
    u, v = graph._check_vertex(u), graph._check_vertex(v)
    if u == v:
        return 0
    n = graph.num_vertices
    seen = [np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)]
    seen[0][u] = True
    seen[1][v] = True
    fronts = [np.array([u]), np.array([v])]
    radius = [0, 0]
    while radius[0] + radius[1] < limit:
        side = 0 if len(fronts[0]) <= len(fronts[1]) else 1
        nb = _expand(graph, fronts[side])
        if seen[1 - side][nb].any():
            return radius[0] + radius[1] + 1
        nb = np.unique(nb[~seen[side][nb]])
        if len(nb) == 0:
            return INF
        seen[side][nb] = True
        fronts[side] = nb
        radius[side] += 1
    return INF


@dataclass(frozen=True)
class ComponentLabeling:
    labels: np.ndarray
    sizes: np.ndarray
    largest: int

    @property
    def count(self) -> int:
        return len(self.sizes)

    def members(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]


def components(graph: Graph) -> ComponentLabeling:
    """Connected components; labels are numbered in order of each component's lowest vertex id."""
    n = graph.num_vertices
    if n == 0:
        return ComponentLabeling(np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int64), -1)
    _, labels = connected_components(graph.to_scipy(), directed=False)
    # renumber by first occurrence so labelling does not depend on scipy internals
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first), dtype=np.int32)
    labels = rank[inv.ravel()]
    sizes = np.bincount(labels)
    return ComponentLabeling(labels, sizes, int(np.argmax(sizes)))


def power_distance(graph: Graph, u: int, v: int, k: int) -> int:
    """Distance in the k-th graph power: ceil(dist/k), or INF when unreachable."""
    if k < 1:
        raise InvalidInputError(f"graph power must be >= 1, got {k}")
    d = int(bfs_distances(graph, u)[graph._check_vertex(v)])
    if d == INF:
        return INF
    return -(-d // k)
