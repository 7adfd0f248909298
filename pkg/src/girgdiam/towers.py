"""Towers: low-weight columns below a cutoff level, their activity test and coarse regions.

A tower of cutoff i is a level-i cell together with all weights in [1, W),
W = 2**(d*(i+1)/2). Above the cutoff the ordinary boxes remain; together they
form the element graph, which is the tessellation with its levels below i
removed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInputError
from .geometry import WeightedVertex
from .regions import Region, RegionBuilder
from .tessellation import BoxId, Tessellation

DEFAULT_EPS = 0.1
DEFAULT_C3 = 4.0


@dataclass(frozen=True, order=True)
class TowerId:
    cutoff: int
    index: tuple

    def __str__(self) -> str:
        return f"T{self.cutoff}:" + ",".join(str(j) for j in self.index)


@dataclass
class TowerActivityReport:
    tower: TowerId
    cond1: bool
    cond2: bool
    cond3: bool
    failing_box: BoxId | None = None
    stray_pair: tuple | None = None
    split_pair: tuple | None = None

    @property
    def active(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3


def _check_cutoff(tess: Tessellation, cutoff: int) -> None:
    if not 0 <= cutoff < tess.rho0:
        raise InvalidInputError(f"tower cutoff must lie in [0, {tess.rho0}), got {cutoff}")


def tower_weight_cap(d: int, cutoff: int) -> float:
    """W = 2**(d*(i+1)/2), the upper end of a tower's weight range."""
    return 2.0 ** (d * (cutoff + 1) / 2)


def eps_level(cutoff: int, eps: float) -> int:
    """k with W**eps rounded down to 2**(d*k/2), i.e. eps lowered to k/(i+1)."""
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    return int(math.floor((cutoff + 1) * eps + 1e-12))


def element_tessellation(tess: Tessellation, cutoff: int) -> Tessellation:
    """Tessellation whose lowest level is the tower level."""
    _check_cutoff(tess, cutoff)
    return Tessellation(tess.side, tess.d, tess.rho0, floor=cutoff, params=tess.params)


def towers(tess: Tessellation, cutoff: int) -> list:
    el = element_tessellation(tess, cutoff)
    return [TowerId(cutoff, el.box_id(c).index) for c in el.level_codes(cutoff)]


def tower_of(vertex: WeightedVertex, tess: Tessellation, cutoff: int):
    """TowerId for weights below W, otherwise the vertex's ordinary box."""
    _check_cutoff(tess, cutoff)
    el = element_tessellation(tess, cutoff)
    code = int(el.box_codes([vertex.pos.coords], [vertex.weight])[0])
    box = el.box_id(code)
    if box.level == cutoff:
        return TowerId(cutoff, box.index)
    return box


def _tower_code(el: Tessellation, t: TowerId) -> int:
    return el.code(BoxId(t.cutoff, t.index))


# --- activity ------------------------------------------------------------------

def _grid(level_values: np.ndarray, n: int, d: int) -> np.ndarray:
    # codes flatten axis 0 fastest, so the C-order grid is indexed [c_{d-1}, ..., c_0]
    return level_values.reshape((n,) * d)


def _block_all(grid: np.ndarray, factor: int) -> np.ndarray:
    d = grid.ndim
    m = grid.shape[0] // factor
    shape = []
    for _ in range(d):
        shape.extend([m, factor])
    g = grid.reshape(shape)
    return g.all(axis=tuple(range(1, 2 * d, 2)))


def _neighbourhood_all(grid: np.ndarray) -> np.ndarray:
    """All() over the 3^d wrap-around neighbourhood of every cell."""
    out = grid.copy()
    for shift in itertools.product((-1, 0, 1), repeat=grid.ndim):
        if any(shift):
            out &= np.roll(grid, shift, axis=tuple(range(grid.ndim)))
    return out


class TowerAnalyzer:
    """Activity of all towers of one cutoff on one graph."""

    def __init__(self, tess: Tessellation, graph, cutoff: int, eps: float = DEFAULT_EPS, c3: float = DEFAULT_C3):
        _check_cutoff(tess, cutoff)
        if tess.floor != 0:
            raise InvalidInputError("tower analysis needs the full tessellation")
        self.tess, self.graph, self.cutoff = tess, graph, cutoff
        self.eps, self.c3 = eps, c3
        self.k = eps_level(cutoff, eps)
        d = tess.d
        self.cap = tower_weight_cap(d, cutoff)
        self.high = 2.0 ** (d * self.k / 2)
        self.diam_limit = 2.0 ** (d * self.k * c3 / 2)
        self.box_counts = tess.occupancy(graph.positions, graph.weights)
        self.el = element_tessellation(tess, cutoff)
        self.n = tess.n_cells(cutoff)
        # tower cell of every vertex (level-i geometry), -1 for weights >= W
        cell = np.minimum(np.floor(graph.positions / tess.box_side(cutoff)).astype(np.int64), self.n - 1)
        self.vertex_tower = self.el.encode(np.full(len(cell), cutoff), cell) - self.el.level_offset(cutoff)
        self.vertex_tower[graph.weights >= self.cap] = -1

    def column_grid(self) -> np.ndarray:
        """Per tower: are all of its boxes at levels k..i active?"""
        ok = np.ones((self.n,) * self.tess.d, dtype=bool)
        for level in range(self.k, self.cutoff + 1):
            act = self.box_counts[self.tess.level_codes(level)] > 0
            grid = _grid(act, self.tess.n_cells(level), self.tess.d)
            ok &= _block_all(grid, 2 ** (self.cutoff - level))
        return ok

    def cond1_all(self) -> np.ndarray:
        """Condition 1 for every tower, indexed by position within the cutoff level."""
        return _neighbourhood_all(self.column_grid()).ravel()

    def _f_towers(self, t: int) -> np.ndarray:
        c = self.el.coords_of([t + self.el.level_offset(self.cutoff)])[0]
        offs = np.array(list(itertools.product((-1, 0, 1), repeat=self.tess.d)))
        codes = self.el.encode(np.full(len(offs), self.cutoff), c + offs) - self.el.level_offset(self.cutoff)
        return np.unique(codes)

    def _first_inactive_box(self, f: np.ndarray):
        tess = self.tess
        fmask = np.zeros(self.n ** tess.d, dtype=bool)
        fmask[f] = True
        for level in range(self.k, self.cutoff + 1):
            codes = tess.level_codes(level)
            coords = tess.coords_of(codes)
            up = coords // 2 ** (self.cutoff - level)
            tw = self.el.encode(np.full(len(up), self.cutoff), up) - self.el.level_offset(self.cutoff)
            bad = codes[fmask[tw] & (self.box_counts[codes] == 0)]
            if len(bad):
                return tess.box_id(bad[0])
        return None

    def report(self, t: TowerId | int) -> TowerActivityReport:
        if isinstance(t, TowerId):
            if t.cutoff != self.cutoff:
                raise InvalidInputError("tower cutoff does not match the analyzer")
            t = _tower_code(self.el, t) - self.el.level_offset(self.cutoff)
        t = int(t)
        tid = TowerId(self.cutoff, self.el.box_id(t + self.el.level_offset(self.cutoff)).index)
        f = self._f_towers(t)
        failing = self._first_inactive_box(f)
        cond1 = failing is None
        cond2, cond3, split, stray = self._component_conditions(f)
        return TowerActivityReport(tid, cond1, cond2, cond3, failing, stray, split)

    def _component_conditions(self, f: np.ndarray):
        g = self.graph
        inside = np.isin(self.vertex_tower, f)
        verts = np.nonzero(inside)[0]
        if len(verts) == 0:
            return True, True, None, None
        local = np.full(g.num_vertices, -1, dtype=np.int64)
        local[verts] = np.arange(len(verts))
        starts, ends = g.indptr[verts], g.indptr[verts + 1]
        counts = ends - starts
        offs = np.repeat(starts - np.cumsum(counts) + counts, counts) + np.arange(int(counts.sum()))
        nb = local[g.indices[offs]]
        src = np.repeat(np.arange(len(verts)), counts)
        keep = nb >= 0
        m = len(verts)
        a = csr_matrix((np.ones(int(keep.sum()), dtype=np.int8), (src[keep], nb[keep])), shape=(m, m))
        _, lab = connected_components(a, directed=False)
        high = g.weights[verts] >= self.high
        split = stray = None
        main = -1
        cond2 = True
        if high.any():
            hl = np.unique(lab[high])
            main = int(lab[np.argmax(high)])
            if len(hl) > 1:
                cond2 = False
                other = int(np.argmax(high & (lab != main)))
                split = (int(verts[np.argmax(high)]), int(verts[other]))
        cond3 = True
        order = np.argsort(lab, kind="stable")
        bounds = np.flatnonzero(np.diff(lab[order])) + 1
        for group in np.split(order, bounds):
            if len(group) < 2 or lab[group[0]] == main:
                continue
            members = verts[group]
            diam, pair = geometric_diameter(g.positions[members], g.side)
            if diam > self.diam_limit:
                cond3 = False
                stray = (int(members[pair[0]]), int(members[pair[1]]))
                break
        return cond2, cond3, split, stray

    def active_all(self) -> np.ndarray:
        """Activity of every tower; conditions 2 and 3 only evaluated where condition 1 holds."""
        c1 = self.cond1_all()
        out = np.zeros_like(c1)
        for t in np.nonzero(c1)[0]:
            cond2, cond3, _, _ = self._component_conditions(self._f_towers(int(t)))
            out[t] = cond2 and cond3
        return out

    def element_activity(self) -> np.ndarray:
        """Activity mask over element codes: towers by the three conditions, higher boxes by occupancy."""
        mask = np.zeros(self.el.total, dtype=bool)
        off = self.el.level_offset(self.cutoff)
        mask[off:off + self.n ** self.tess.d] = self.active_all()
        above = self.tess.level_offset(self.cutoff + 1)
        mask[self.el.level_offset(self.cutoff + 1):] = self.box_counts[above:] > 0
        return mask


def geometric_diameter(positions: np.ndarray, side: float):
    """Max pairwise max-norm torus distance and an index pair attaining it.

    Per axis the farthest circular partner of each point sits next to the
    antipode in sorted order, so this is O(m log m).
    """
    pos = np.asarray(positions, dtype=np.float64)
    best, pair = 0.0, (0, 0)
    for k in range(pos.shape[1]):
        x = pos[:, k]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        target = np.mod(xs + side / 2, side)
        j = np.searchsorted(xs, target) % len(xs)
        for cand in (j, (j - 1) % len(xs)):
            g = np.abs(xs - xs[cand])
            g = np.minimum(g, side - g)
            i = int(np.argmax(g))
            if g[i] > best:
                best, pair = float(g[i]), (int(order[i]), int(order[cand[i]]))
    return best, pair


def is_active_tower(tess: Tessellation, graph, t: TowerId, eps: float = DEFAULT_EPS,
                    c3: float = DEFAULT_C3) -> TowerActivityReport:
    return TowerAnalyzer(tess, graph, t.cutoff, eps, c3).report(t)


def tower_activity_rate(tess_for, graphs, levels, eps: float = DEFAULT_EPS, c3: float = DEFAULT_C3) -> dict:
    """Fraction of active towers per cutoff level over an ensemble of graphs.

    `tess_for(graph)` returns the tessellation of a graph; `levels` lists cutoffs.
    """
    out = {}
    for level in levels:
        hits = total = 0
        for g in graphs:
            tess = tess_for(g)
            if not 0 <= level < tess.rho0:
                continue
            act = TowerAnalyzer(tess, g, level, eps, c3).active_all()
            hits += int(act.sum())
            total += len(act)
        out[level] = hits / total if total else float("nan")
    return out


class CoarseRegions:
    """Regions over the element graph (towers below the cutoff, boxes above)."""

    def __init__(self, tess: Tessellation, graph, cutoff: int, eps: float = DEFAULT_EPS, c3: float = DEFAULT_C3):
        self.analyzer = TowerAnalyzer(tess, graph, cutoff, eps, c3)
        self.el = self.analyzer.el
        self.active = self.analyzer.element_activity()
        self.builder = RegionBuilder(self.el, self.active)
        self.vertex_elements = self.el.box_codes(graph.positions, graph.weights)

    def element_code(self, x) -> int:
        if isinstance(x, TowerId):
            return _tower_code(self.el, x)
        if isinstance(x, BoxId):
            return self.el.code(x)
        return int(x)

    def region(self, x1, x2) -> Region:
        return self.builder.region(self.element_code(x1), self.element_code(x2))

    def region_for_vertices(self, u: int, v: int) -> Region:
        return self.builder.region(self.vertex_elements[u], self.vertex_elements[v])


def compute_region_coarse(tess: Tessellation, graph, cutoff: int, eps: float, x1, x2,
                          c3: float = DEFAULT_C3) -> Region:
    return CoarseRegions(tess, graph, cutoff, eps, c3).region(x1, x2)


def write_activity_csv(fh, analyzer: TowerAnalyzer, reports=None) -> None:
    """Rows level,tower_index,cond1,cond2,cond3,active for every tower."""
    fh.write("level,tower_index,cond1,cond2,cond3,active\n")
    if reports is None:
        reports = [analyzer.report(i) for i in range(analyzer.n ** analyzer.tess.d)]
    for r in reports:
        idx = "-".join(str(j) for j in r.tower.index)
        fh.write(f"{r.tower.cutoff},{idx},{int(r.cond1)},{int(r.cond2)},{int(r.cond3)},{int(r.active)}\n")


__all__ = [
    "TowerId", "TowerActivityReport", "TowerAnalyzer", "CoarseRegions", "towers", "tower_of",
    "is_active_tower", "tower_activity_rate", "compute_region_coarse", "element_tessellation",
    "eps_level", "tower_weight_cap", "geometric_diameter", "write_activity_csv",
]
