"""Independent reference implementations used by the tests."""
from collections import deque

import numpy as np


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def uf_partition(n, edges):
    uf = UnionFind(n)
    for a, b in edges:
        uf.union(int(a), int(b))
    groups = {}
    for v in range(n):
        groups.setdefault(uf.find(v), []).append(v)
    return sorted(tuple(g) for g in groups.values())


def queue_bfs(n, adj, s):
    dist = [-1] * n
    dist[s] = 0
    q = deque([s])
    while q:
        x = q.popleft()
        for y in adj[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def adjacency_lists(n, edges):
    adj = [set() for _ in range(n)]
    for a, b in edges:
        a, b = int(a), int(b)
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def brute_diameter(n, edges):
    adj = adjacency_lists(n, edges)
    best = 0
    for s in range(n):
        best = max(best, max(queue_bfs(n, adj, s)))
    return best


# --- boxes as closed sets in the augmented space --------------------------------

def box_extents(tess):
    """Per box code: geometric lower corners (d,), side, weight interval (lo, hi)."""
    lo = np.zeros((tess.total, tess.d))
    side = np.zeros(tess.total)
    wlo = np.zeros(tess.total)
    whi = np.zeros(tess.total)
    for level in tess.levels:
        codes = tess.level_codes(level)
        s = tess.box_side(level)
        if level == tess.rho0:
            lo[codes] = 0.0
        else:
            lo[codes] = tess.coords_of(codes, np.full(len(codes), level)) * s
        side[codes] = s
        a, b = tess.weight_range(level)
        wlo[codes], whi[codes] = a, b
    return lo, side, wlo, whi


def _arc_overlap(a0, a1, b0, b1, period):
    """Longest overlap of closed arcs [a0,a1], [b0,b1] on a circle; -1 when disjoint."""
    best = np.full(np.broadcast(a0, b0).shape, -1.0)
    for k in (-1.0, 0.0, 1.0):
        o = np.minimum(a1, b1 + k * period) - np.maximum(a0, b0 + k * period)
        best = np.maximum(best, np.where(o >= 0, o, -1.0))
    return best


def brute_box_edges(tess, chunk=256):
    """(B edges, G+ edges) as sets of (a, b) with a < b, from closure intersection dimensions."""
    lo, side, wlo, whi = box_extents(tess)
    L = tess.side
    b_edges, g_edges = set(), set()
    idx = np.arange(tess.total)
    for s in range(0, tess.total, chunk):
        rows = idx[s:s + chunk]
        nonempty = np.ones((len(rows), tess.total), dtype=bool)
        dims = np.zeros((len(rows), tess.total), dtype=np.int64)
        for k in range(tess.d):
            a0 = lo[rows, k][:, None]
            o = _arc_overlap(a0, a0 + side[rows][:, None], lo[None, :, k], (lo[:, k] + side)[None, :], L)
            nonempty &= o >= 0
            dims += o > 0
        w0 = np.maximum(wlo[rows][:, None], wlo[None, :])
        w1 = np.minimum(whi[rows][:, None], whi[None, :])
        nonempty &= w1 >= w0
        dims += w1 > w0
        for a, b in zip(*np.nonzero(nonempty)):
            a, b = int(rows[a]), int(b)
            if a < b:
                g_edges.add((a, b))
                if dims[a - s, b] == tess.d:
                    b_edges.add((a, b))
    return b_edges, g_edges
