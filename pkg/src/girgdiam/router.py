"""Box shadows of edges, crossing anchors and confined u-v walks.

A confined walk replaces every excursion of a shortest path outside W u S by
a detour along the visible boundary of the hole it entered. The detour is
anchored with vertices found in boxes the edge's straight segment crosses,
and every hop of the result is re-measured in the graph.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, LemmaViolationError, NoPathError
from .graph import INF, bounded_distance, shortest_path
from .regions import Region, RegionBuilder
from .tessellation import Tessellation

MAX_HOP = 3


class VertexBoxes:
    """Box code of every vertex plus the inverse lookup box -> vertex ids (ascending)."""

    def __init__(self, tess: Tessellation, graph):
        self.tess = tess
        self.graph = graph
        self.codes = tess.box_codes(graph.positions, graph.weights)
        self.order = np.argsort(self.codes, kind="stable")
        counts = np.bincount(self.codes, minlength=tess.total)
        self.starts = np.concatenate([[0], np.cumsum(counts)])
        self.active = counts > 0

    def members(self, code: int) -> np.ndarray:
        return self.order[self.starts[code]:self.starts[code + 1]]

    def representative(self, code: int) -> int:
        m = self.members(code)
        if len(m) == 0:
            raise LemmaViolationError(f"box {self.tess.box_id(code)} is empty", box=self.tess.box_id(code))
        return int(m[0])


@dataclass
class BoxShadow:
    u: int
    v: int
    boxes: list


@dataclass
class ConfinedWalk:
    vertices: list
    boxes: list
    hops: list
    region: Region = field(repr=False)
    excursions: int = 0

    @property
    def length(self) -> int:
        """Sum of certified hop distances: an upper bound on dist(u, v)."""
        return int(sum(self.hops))

    @property
    def constant(self) -> float:
        """length / |W u S|."""
        return self.length / max(1, self.region.ws_size)

    def dump(self, fh) -> None:
        t = self.region.tess
        for i, (x, b) in enumerate(zip(self.vertices, self.boxes)):
            fh.write(f"vertex {x} {t.box_id(b)}\n")
            if i < len(self.hops):
                fh.write(f"hop {self.hops[i]}\n")


# --- shadows ------------------------------------------------------------------

def _geodesic_delta(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    """Per-coordinate shorter-arc displacement from a to b; half-side ties go positive."""
    dv = b - a
    dv = np.where(dv > side / 2, dv - side, dv)
    dv = np.where(dv < -side / 2, dv + side, dv)
    return np.where(dv == -side / 2, side / 2, dv)


def shadow_codes(tess: Tessellation, pos_x, w_x: float, pos_y, w_y: float) -> list:
    """Boxes met by the straight segment from (pos_x, w_x) to (pos_y, w_y), in order.

    Breakpoints are the parameters where the segment crosses a weight-level
    boundary or a cell boundary of any level it passes through; the box is
    constant between breakpoints and is read off at each midpoint. Segments
    that only graze a corner are not reported separately.
    """
    px = np.asarray(pos_x, dtype=np.float64)
    py = np.asarray(pos_y, dtype=np.float64)
    dv = _geodesic_delta(px, py, tess.side)
    lv = tess.vertex_levels([w_x, w_y])
    lo, hi = int(lv.min()), int(lv.max())
    ts = [0.0, 1.0]
    dw = w_y - w_x
    for level in range(lo + 1, hi + 1):
        bound = 2.0 ** (tess.d * level / 2)
        if dw != 0:
            ts.append((bound - w_x) / dw)
    for level in range(lo, min(hi, tess.rho0 - 1) + 1):
        cell = tess.box_side(level)
        for k in range(tess.d):
            if dv[k] == 0:
                continue
            a, b = sorted((px[k], px[k] + dv[k]))
            ks = np.arange(np.ceil(a / cell), np.floor(b / cell) + 1)
            ts.extend(((ks * cell - px[k]) / dv[k]).tolist())
    t = np.unique(np.clip(np.array(ts), 0.0, 1.0))
    sample = np.concatenate([[0.0], (t[:-1] + t[1:]) / 2, [1.0]])
    pos = np.mod(px[None, :] + sample[:, None] * dv[None, :], tess.side)
    pos[pos >= tess.side] = 0.0
    wts = w_x + sample * dw
    wts[0], wts[-1] = w_x, w_y
    codes = tess.box_codes(pos, wts)
    keep = np.concatenate([[True], codes[1:] != codes[:-1]])
    return [int(c) for c in codes[keep]]


def box_shadow(tess: Tessellation, graph, edge) -> BoxShadow:
    x, y = (int(e) for e in edge)
    if not graph.has_edge(x, y):
        raise InvalidInputError(f"({x}, {y}) is not an edge")
    codes = shadow_codes(tess, graph.positions[x], graph.weights[x], graph.positions[y], graph.weights[y])
    return BoxShadow(x, y, codes)


def crossing_anchor(tess: Tessellation, graph, edge, box, index: VertexBoxes | None = None) -> int:
    """Lowest-id vertex of `box` equal or adjacent to an endpoint of `edge`."""
    if index is None:
        index = VertexBoxes(tess, graph)
    code = tess.code(box) if not isinstance(box, (int, np.integer)) else int(box)
    x, y = (int(e) for e in edge)
    members = index.members(code)
    if len(members):
        ok = (members == x) | (members == y)
        ok |= np.isin(members, graph.neighbors(x)) | np.isin(members, graph.neighbors(y))
        if ok.any():
            return int(members[np.argmax(ok)])
    raise LemmaViolationError(
        f"no vertex of {tess.box_id(code)} is adjacent to an endpoint of edge ({x}, {y})",
        box=tess.box_id(code), edge=(x, y))


# --- confined walk ------------------------------------------------------------

class Router:
    """Confined walks for many pairs on one graph and tessellation."""

    def __init__(self, tess: Tessellation, graph):
        self.tess = tess
        self.graph = graph
        self.index = VertexBoxes(tess, graph)
        self.regions = RegionBuilder(tess, self.index.active)

    def region_for(self, u: int, v: int) -> Region:
        return self.regions.region(self.index.codes[u], self.index.codes[v])

    def _anchor(self, start: int, other: int, ws: np.ndarray, w: np.ndarray) -> int:
        """Anchor for the edge {start, other}, searched from start's end of its shadow.

        The first shadow box inside W u S lies in S, on the visible boundary of
        start's hole; the lowest-id vertex there adjacent to an endpoint is returned.
        """
        g = self.graph
        codes = shadow_codes(self.tess, g.positions[start], g.weights[start],
                             g.positions[other], g.weights[other])
        for c in codes:
            if ws[c]:
                if w[c]:
                    raise LemmaViolationError(
                        f"shadow of ({start}, {other}) enters W without meeting S",
                        box=self.tess.box_id(c), edge=(start, other))
                return crossing_anchor(self.tess, g, (start, other), c, self.index)
        raise LemmaViolationError(f"shadow of ({start}, {other}) never meets W u S", edge=(start, other))

    def _boundary_route(self, a: int, b: int, allowed: np.ndarray) -> list:
        """B-path of boxes from a to b inside `allowed` (a visible boundary)."""
        if a == b:
            return [a]
        prev = {a: a}
        queue = deque([a])
        while queue:
            cur = queue.popleft()
            _, nb = self.tess.neighbors([cur], "B")
            for x in nb.tolist():
                if allowed[x] and x not in prev:
                    prev[x] = cur
                    if x == b:
                        out = [b]
                        while out[-1] != a:
                            out.append(prev[out[-1]])
                        return out[::-1]
                    queue.append(x)
        raise LemmaViolationError(
            f"visible boundary does not connect {self.tess.box_id(a)} to {self.tess.box_id(b)}")

    def walk(self, u: int, v: int, region: Region | None = None) -> ConfinedWalk:
        g, idx = self.graph, self.index
        u, v = g._check_vertex(u), g._check_vertex(v)
        if region is None:
            region = self.region_for(u, v)
        if u == v:
            return ConfinedWalk([u], [int(idx.codes[u])], [], region)
        path = shortest_path(g, u, v)
        if not path:
            raise NoPathError(f"{u} and {v} are in different components")
        ws, w = region.ws_mask(), region.w_mask()
        boxes = idx.codes[path]
        inside = ws[boxes]
        seq = [path[0]]
        excursions = 0
        k = 0
        while k < len(path) - 1:
            if inside[k + 1]:
                seq.append(path[k + 1])
                k += 1
                continue
            j = k + 1
            while not inside[j]:
                j += 1
            excursions += 1
            labels = region.hole_labels()
            # anchors: entry, bridges between holes, exit
            legs = [(self._anchor(path[k + 1], path[k], ws, w), int(labels[boxes[k + 1]]))]
            for m in range(k + 1, j - 1):
                la, lb = labels[boxes[m]], labels[boxes[m + 1]]
                if la != lb:
                    legs.append((self._anchor(path[m], path[m + 1], ws, w), int(la)))
                    legs.append((self._anchor(path[m + 1], path[m], ws, w), int(lb)))
            legs.append((self._anchor(path[j - 1], path[j], ws, w), int(labels[boxes[j - 1]])))
            for (za, ha), (zb, hb) in zip(legs[0::2], legs[1::2]):
                if ha != hb:
                    raise LemmaViolationError("anchors of one boundary leg lie in different holes")
                allowed = np.zeros(self.tess.total, dtype=bool)
                allowed[region.visible_boundary_of_hole(ha)] = True
                route = self._boundary_route(int(idx.codes[za]), int(idx.codes[zb]), allowed)
                seq.append(za)
                seq.extend(idx.representative(c) for c in route[1:-1])
                seq.append(zb)
            seq.append(path[j])
            k = j
        seq = _compress(seq, idx.codes)
        hops = []
        for a, b in zip(seq, seq[1:]):
            h = bounded_distance(g, a, b, MAX_HOP)
            if h == INF:
                raise LemmaViolationError(f"walk step {a} -> {b} exceeds {MAX_HOP} hops", edge=(a, b))
            hops.append(h)
        return ConfinedWalk(seq, [int(idx.codes[x]) for x in seq], hops, region, excursions)


def _compress(seq: list, codes: np.ndarray) -> list:
    """Cut back to the earlier visit whenever a box repeats; vertices sharing a box are adjacent."""
    out: list = []
    where: dict = {}
    for x in seq:
        c = int(codes[x])
        if c in where:
            p = where[c]
            for y in out[p + 1:]:
                where.pop(int(codes[y]), None)
            del out[p + 1:]
            if out[p] == x:
                continue
            out.append(x)
            continue
        where[c] = len(out)
        out.append(x)
    return out


def construct_confined_walk(tess: Tessellation, graph, u: int, v: int) -> ConfinedWalk:
    return Router(tess, graph).walk(u, v)


def validate_walk(tess: Tessellation, graph, walk: ConfinedWalk) -> list:
    """Independent re-check; returns a list of problems (empty when the walk is valid)."""
    problems = []
    ws = walk.region.ws_mask()
    codes = tess.box_codes(graph.positions[walk.vertices], graph.weights[walk.vertices])
    for x, c in zip(walk.vertices, codes):
        if not ws[c]:
            problems.append(f"vertex {x} lies in {tess.box_id(c)} outside W u S")
    for a, b in zip(walk.vertices, walk.vertices[1:]):
        if bounded_distance(graph, a, b, MAX_HOP) == INF:
            problems.append(f"step {a} -> {b} longer than {MAX_HOP}")
    return problems


def verify_distance_vs_region(tess: Tessellation, graph, pairs, router: Router | None = None) -> list:
    """Rows (u, v, dist, |W|, |S|, dist / |W u S|) for each connected pair; u == v pairs are skipped."""
    router = router or Router(tess, graph)
    rows = []
    for u, v in pairs:
        u, v = int(u), int(v)
        if u == v:
            continue
        p = shortest_path(graph, u, v)
        if not p:
            continue
        r = router.region_for(u, v)
        dist = len(p) - 1
        rows.append((u, v, dist, r.size, len(r.s_set), dist / r.ws_size))
    return rows


__all__ = [
    "BoxShadow", "ConfinedWalk", "Router", "VertexBoxes", "box_shadow", "shadow_codes",
    "crossing_anchor", "construct_confined_walk", "validate_walk", "verify_distance_vs_region",
]
