"""Graph diameter: exact all-sources BFS, iFUB and the double-sweep lower bound.

Diameters are taken per connected component; the overall value is the
maximum over components, so unreachable pairs never count.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import shortest_path as _sp_shortest_path

from .graph import INF, Graph, bfs_distances, components


@dataclass
class DiameterResult:
    overall: int
    components: list = field(default_factory=list)  # (size, diameter) per component, by lowest vertex id
    bfs_runs: int = 0

    def to_dict(self) -> dict:
        return {
            "overall": int(self.overall),
            "components": [{"size": int(s), "diameter": int(d)} for s, d in self.components],
            "bfs_runs": int(self.bfs_runs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _component_lists(graph: Graph):
    lab = components(graph)
    order = np.argsort(lab.labels, kind="stable")
    bounds = np.cumsum(lab.sizes)[:-1]
    return np.split(order, bounds)


def exact_diameter(graph: Graph, chunk: int = 256) -> DiameterResult:
    """All-sources BFS through scipy's unweighted shortest paths.

    Kept deliberately separate from the BFS in this package so it can serve
    as the reference for `ifub_diameter`.
    """
    if graph.num_vertices == 0:
        return DiameterResult(0, [], 0)
    a = graph.to_scipy()
    out, runs = [], 0
    for members in _component_lists(graph):
        if len(members) <= 2:
            out.append((len(members), len(members) - 1))
            continue
        sub = a[members][:, members]
        best = 0
        for s in range(0, len(members), chunk):
            idx = np.arange(s, min(s + chunk, len(members)))
            dist = _sp_shortest_path(sub, method="D", unweighted=True, directed=False, indices=idx)
            best = max(best, int(dist.max()))
            runs += len(idx)
        out.append((len(members), best))
    return DiameterResult(max(d for _, d in out), out, runs)


class _Counter:
    def __init__(self, graph: Graph):
        self.graph = graph
        self.runs = 0

    def bfs(self, s: int) -> np.ndarray:
        self.runs += 1
        return bfs_distances(self.graph, s)


def _ecc(dist: np.ndarray, members: np.ndarray):
    dm = dist[members]
    e = int(dm.max())
    far = int(members[np.argmax(dm == e)])  # lowest id among the farthest (members are sorted)
    return e, far


def _step_towards(graph: Graph, dist: np.ndarray, x: int) -> int:
    nb = graph.neighbors(x)
    return int(nb[np.argmax(dist[nb] == dist[x] - 1)])


def _ifub_component(bfs: _Counter, members: np.ndarray) -> int:
    g = bfs.graph
    if len(members) <= 2:
        return len(members) - 1
    # ecc(x) <= dist(s, x) + ecc(s) for every BFS source s seen so far
    bound = np.full(g.num_vertices, INF, dtype=np.int64)

    def run(s: int):
        dist = bfs.bfs(s)
        e, far = _ecc(dist, members)
        np.minimum(bound, dist.astype(np.int64) + e, out=bound)
        return dist, e, far

    # double sweep, then restart from the middle of the a-b path
    d0, _, a = run(int(members[0]))
    da, lower, b = run(a)
    u = b
    for _ in range(lower // 2):
        u = _step_towards(g, da, u)
    du, i, _ = (d0, int(d0[members].max()), None) if u == members[0] else run(u)
    lower = max(lower, i)
    upper = 2 * i
    levels = du[members]
    if upper > lower:
        hub = int(members[np.argmax(g.degrees()[members])])
        if hub not in (int(members[0]), a, u):
            lower = max(lower, run(hub)[1])
    while upper > lower:
        fringe = members[levels == i]  # ascending ids
        for x in fringe:
            if bound[x] <= lower:
                continue  # cannot raise the lower bound
            lower = max(lower, run(int(x))[1])
        # pairs below level i are at most 2(i-1) apart, so a whole level decides
        if lower > 2 * (i - 1):
            return lower
        upper = 2 * (i - 1)
        i -= 1
    return lower


def ifub_diameter(graph: Graph, largest_only: bool = False) -> DiameterResult:
    """Fringe-based exact diameter (iFUB) per component.

    Equal-level vertices are processed by increasing id so BFS counts are
    reproducible. With `largest_only` only the largest component is solved
    and reported.
    """
    if graph.num_vertices == 0:
        return DiameterResult(0, [], 0)
    bfs = _Counter(graph)
    comps = _component_lists(graph)
    if largest_only:
        comps = [max(comps, key=len)]
    out = [(len(m), _ifub_component(bfs, m)) for m in comps]
    return DiameterResult(max(d for _, d in out), out, bfs.runs)


def double_sweep_lower(graph: Graph, start: int = 0) -> int:
    """Eccentricity of the farthest vertex from `start`, a lower bound on the diameter."""
    if graph.num_vertices == 0:
        return 0
    d0 = bfs_distances(graph, start)
    reach = np.nonzero(d0 != INF)[0]
    _, a = _ecc(d0, reach)
    da = bfs_distances(graph, a)
    return int(da[reach].max())


def largest_component_diameter(graph: Graph):
    """(size, diameter) of the largest component via iFUB."""
    res = ifub_diameter(graph, largest_only=True)
    return res.components[0]


__all__ = ["DiameterResult", "exact_diameter", "ifub_diameter", "double_sweep_lower",
           "largest_component_diameter"]
