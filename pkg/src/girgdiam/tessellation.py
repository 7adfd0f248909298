"""Level hierarchy of boxes over position x weight space.

Level l < rho0 splits the torus into N_l = 2**(rho0 - l) cells per axis of side
D_l = 2**l * D0 and holds weights in [2**(d*l/2), 2**(d*(l+1)/2)). The single
TOP box (level rho0) covers the whole torus and every weight above.

Internally a box is an integer code: levels are stacked from `floor` up to
TOP and within a level the zero-based cell coordinates are flattened with
axis 0 fastest. `BoxId` is the public, one-based form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidInputError, SizeLimitError
from .geometry import ModelParams, WeightedVertex

GF2_BOX_LIMIT = 200


@dataclass(frozen=True, order=True)
class BoxId:
    """Box by level and one-based cell index; TOP has an empty index."""
    level: int
    index: tuple = ()

    def __str__(self) -> str:
        if not self.index:
            return "TOP"
        return f"L{self.level}:" + ",".join(str(j) for j in self.index)

    @property
    def is_top(self) -> bool:
        return not self.index


class Tessellation:
    """Immutable box hierarchy for a torus of side `side` in dimension `d`.

    `floor` > 0 drops the levels below it; boxes at `floor` then have no
    children, which is how the tower element graph is built.
    """

    def __init__(self, side: float, d: int, rho0: int, floor: int = 0, params: ModelParams | None = None):
        if rho0 < 1:
            raise InvalidInputError(f"rho0 must be at least 1, got {rho0}")
        if not 0 <= floor < rho0:
            raise InvalidInputError(f"floor level must lie in [0, {rho0}), got {floor}")
        self.side = float(side)
        self.d = int(d)
        self.rho0 = int(rho0)
        self.floor = int(floor)
        self.params = params
        self.d0 = self.side / 2**self.rho0
        levels = np.arange(self.floor, self.rho0 + 1)
        self.cells_per_axis = np.where(levels < self.rho0, 2 ** (self.rho0 - levels), 1).astype(np.int64)
        counts = self.cells_per_axis ** self.d
        self._offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.total = int(self._offsets[-1])
        self.top_code = self.total - 1

    # --- level bookkeeping ---------------------------------------------------

    @property
    def levels(self) -> range:
        return range(self.floor, self.rho0 + 1)

    def box_side(self, level: int) -> float:
        """Side length D_l; TOP spans the whole torus."""
        return self.side if level >= self.rho0 else self.d0 * 2**level

    def weight_range(self, level: int) -> tuple:
        lo = 2.0 ** (self.d * level / 2)
        if level >= self.rho0:
            return lo, math.inf
        return lo, 2.0 ** (self.d * (level + 1) / 2)

    def n_cells(self, level: int) -> int:
        return int(self.cells_per_axis[level - self.floor])

    def level_count(self, level: int) -> int:
        return int(self._offsets[level - self.floor + 1] - self._offsets[level - self.floor])

    def level_offset(self, level: int) -> int:
        return int(self._offsets[level - self.floor])

    def level_codes(self, level: int) -> np.ndarray:
        return np.arange(self._offsets[level - self.floor], self._offsets[level - self.floor + 1])

    # --- code <-> coordinates -----------------------------------------------

    def levels_of(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        return np.searchsorted(self._offsets, codes, side="right") - 1 + self.floor

    def coords_of(self, codes, levels=None) -> np.ndarray:
        """Zero-based cell coordinates, shape (k, d); TOP maps to zeros."""
        codes = np.asarray(codes, dtype=np.int64)
        levels = self.levels_of(codes) if levels is None else np.asarray(levels, dtype=np.int64)
        rel = codes - self._offsets[levels - self.floor]
        n = self.cells_per_axis[levels - self.floor]
        out = np.empty((len(codes), self.d), dtype=np.int64)
        for k in range(self.d):
            out[:, k] = rel % n
            rel = rel // n
        return out

    def encode(self, levels, coords) -> np.ndarray:
        levels = np.asarray(levels, dtype=np.int64)
        coords = np.asarray(coords, dtype=np.int64).reshape(len(levels), self.d)
        n = self.cells_per_axis[levels - self.floor]
        code = np.zeros(len(levels), dtype=np.int64)
        for k in range(self.d - 1, -1, -1):
            code = code * n + coords[:, k] % n
        return code + self._offsets[levels - self.floor]

    def box_id(self, code: int) -> BoxId:
        code = int(code)
        if not 0 <= code < self.total:
            raise InvalidInputError(f"box code {code} out of range")
        level = int(self.levels_of([code])[0])
        if level == self.rho0:
            return BoxId(level, ())
        c = self.coords_of([code], [level])[0]
        return BoxId(level, tuple(int(x) + 1 for x in c))

    def code(self, box: BoxId) -> int:
        if not self.floor <= box.level <= self.rho0:
            raise InvalidInputError(f"level {box.level} outside [{self.floor}, {self.rho0}]")
        if box.level == self.rho0:
            if box.index:
                raise InvalidInputError("TOP takes no index")
            return self.top_code
        if len(box.index) != self.d:
            raise InvalidInputError(f"box index needs {self.d} entries, got {len(box.index)}")
        n = self.n_cells(box.level)
        if any(not 1 <= j <= n for j in box.index):
            raise InvalidInputError(f"index {box.index} outside [1, {n}] at level {box.level}")
        return int(self.encode([box.level], [[j - 1 for j in box.index]])[0])

    def parse_box(self, text: str) -> BoxId:
        text = text.strip()
        if text == "TOP":
            return BoxId(self.rho0, ())
        try:
            lv, idx = text[1:].split(":")
            box = BoxId(int(lv), tuple(int(j) for j in idx.split(",")))
        except ValueError:
            raise InvalidInputError(f"malformed box id {text!r}") from None
        self.code(box)
        return box

    # --- vertices -> boxes --------------------------------------------------

    def vertex_levels(self, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=np.float64)
        lv = np.floor(2.0 * np.log2(w) / self.d).astype(np.int64)
        return np.clip(lv, self.floor, self.rho0)

    def box_codes(self, positions, weights) -> np.ndarray:
        """Box code of every (position, weight) pair."""
        pos = np.asarray(positions, dtype=np.float64).reshape(-1, self.d)
        lv = self.vertex_levels(weights)
        rel = lv - self.floor
        n = self.cells_per_axis[rel]
        sides = self.d0 * 2.0 ** lv
        coords = np.minimum(np.floor(pos / sides[:, None]).astype(np.int64), (n - 1)[:, None])
        coords[lv == self.rho0] = 0
        return self.encode(lv, coords)

    # --- tree structure -----------------------------------------------------

    def parent_codes(self, codes) -> np.ndarray:
        """Parent code per box; -1 for TOP."""
        codes = np.asarray(codes, dtype=np.int64)
        lv = self.levels_of(codes)
        out = np.full(len(codes), -1, dtype=np.int64)
        up = lv < self.rho0
        if up.any():
            c = self.coords_of(codes[up], lv[up]) // 2
            out[up] = self.encode(lv[up] + 1, c)
        return out

    def children_codes(self, code: int) -> np.ndarray:
        level = int(self.levels_of([code])[0])
        if level == self.floor:
            return np.empty(0, dtype=np.int64)
        if level == self.rho0:
            return self.level_codes(level - 1)
        base = self.coords_of([code], [level])[0] * 2
        offs = np.array(list(itertools.product((0, 1), repeat=self.d)))
        kids = self.encode(np.full(len(offs), level - 1), base + offs)
        return np.unique(kids)

    # --- adjacency ----------------------------------------------------------

    def neighbors(self, codes, kind: str = "G"):
        """Vectorised neighbour lists.

        Returns (src, nbr): for every input position src[k], nbr[k] is a
        neighbouring box code. Pairs are unique and never self-loops. `kind`
        is "B" (closures meet in a d-dimensional set) or "G" (closures meet).
        """
        if kind not in ("B", "G"):
            raise InvalidInputError(f"unknown adjacency kind {kind!r}")
        codes = np.asarray(codes, dtype=np.int64).ravel()
        lv = self.levels_of(codes)
        coords = self.coords_of(codes, lv)
        srcs, nbrs = [], []
        idx_all = np.arange(len(codes))
        for level in np.unique(lv):
            sel = lv == level
            idx, c = idx_all[sel], coords[sel]
            for s, nb in self._level_neighbors(int(level), c, kind):
                srcs.append(idx[s])
                nbrs.append(nb)
        if not srcs:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        src = np.concatenate(srcs)
        nbr = np.concatenate(nbrs)
        key = np.unique(src * self.total + nbr)
        src, nbr = key // self.total, key % self.total
        keep = nbr != codes[src]
        return src[keep], nbr[keep]

    def _level_neighbors(self, level: int, c: np.ndarray, kind: str):
        d = self.d
        m = len(c)
        rows = np.arange(m)
        if level == self.rho0:
            # TOP: every level rho0-1 box below it, under both relations
            if level > self.floor:
                kids = self.level_codes(level - 1)
                yield np.repeat(rows, len(kids)), np.tile(kids, m)
            return
        n = self.n_cells(level)
        same = np.full(m, level)
        # same level
        if kind == "B":
            offs = []
            for k in range(d):
                for s in (-1, 1):
                    o = np.zeros(d, dtype=np.int64)
                    o[k] = s
                    offs.append(o)
            offs = np.array(offs)
        else:
            offs = np.array([o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)])
        for o in offs:
            yield rows, self.encode(same, c + o)
        # upward
        if level + 1 == self.rho0:
            yield rows, np.full(m, self.top_code)
        else:
            p = c // 2
            up = np.full(m, level + 1)
            if kind == "B":
                yield rows, self.encode(up, p)
            else:
                # along each axis the closure also touches the parent's neighbour on the aligned side
                side_step = np.where(c % 2 == 0, -1, 1)
                for mask in itertools.product((0, 1), repeat=d):
                    yield rows, self.encode(up, p + side_step * np.array(mask))
        # downward
        if level > self.floor:
            down = np.full(m, level - 1)
            steps = (0, 1) if kind == "B" else (-1, 0, 1, 2)
            for o in itertools.product(steps, repeat=d):
                yield rows, self.encode(down, 2 * c + np.array(o))

    def neighbor_set(self, code: int, kind: str = "G") -> set:
        _, nb = self.neighbors([code], kind)
        return set(int(x) for x in nb)

    @cached_property
    def b_edges(self) -> np.ndarray:
        """All undirected B-edges as (E, 2) code pairs with a < b."""
        return self._all_edges("B")

    @cached_property
    def gplus_edges(self) -> np.ndarray:
        return self._all_edges("G")

    def _all_edges(self, kind: str) -> np.ndarray:
        out = []
        step = 1 << 16
        for s in range(0, self.total, step):
            codes = np.arange(s, min(self.total, s + step))
            src, nb = self.neighbors(codes, kind)
            a = codes[src]
            keep = a < nb
            out.append(np.stack([a[keep], nb[keep]], axis=1))
        return np.concatenate(out)

    def adjacent(self, a, b, kind: str = "G") -> np.ndarray:
        """Element-wise adjacency test for code arrays a, b."""
        a = np.asarray(a, dtype=np.int64).ravel()
        b = np.asarray(b, dtype=np.int64).ravel()
        ua, inv = np.unique(a, return_inverse=True)
        src, nb = self.neighbors(ua, kind)
        keys = np.sort(ua[src] * self.total + nb)
        if len(keys) == 0:
            return np.zeros(len(a), dtype=bool)
        q = a * self.total + b
        pos = np.minimum(np.searchsorted(keys, q), len(keys) - 1)
        return keys[pos] == q

    def max_gplus_degree(self) -> int:
        """Largest G+ degree over all boxes (measured, not the 3^d - 1 of a single level)."""
        e = self.gplus_edges
        deg = np.bincount(e.ravel(), minlength=self.total)
        return int(deg.max()) if len(deg) else 0

    # --- activity ------------------------------------------------------------

    def occupancy(self, positions, weights) -> np.ndarray:
        """Number of vertices per box."""
        return np.bincount(self.box_codes(positions, weights), minlength=self.total)

    def active_mask(self, graph) -> np.ndarray:
        return self.occupancy(graph.positions, graph.weights) > 0

    def __repr__(self) -> str:
        return (f"Tessellation(d={self.d}, side={self.side:g}, rho0={self.rho0}, "
                f"d0={self.d0:g}, floor={self.floor}, boxes={self.total})")


def rho0_for(side: float, d0_target: float) -> int:
    """Smallest rho with side / 2**rho <= d0_target."""
    rho = max(0, math.ceil(math.log2(side / d0_target)))
    # guard float rounding on exact powers of two
    while rho > 0 and side / 2 ** (rho - 1) <= d0_target:
        rho -= 1
    while side / 2**rho > d0_target:
        rho += 1
    return rho


def build_tessellation(params: ModelParams, d0_target: float | None = None, floor: int = 0) -> Tessellation:
    """Tessellation with D0 = side / 2**rho0 <= d0_target.

    `d0_target` overrides the value stored in `params`; it exists so that
    deliberately coarse tessellations (D0 > 1/2) can be studied.
    """
    target = params.d0_target if d0_target is None else float(d0_target)
    if not target > 0:
        raise InvalidInputError(f"d0_target must be positive, got {target}")
    rho0 = rho0_for(params.side, target)
    if rho0 < 1:
        raise InvalidInputError(f"torus side {params.side:g} too small for D0 target {target:g}")
    return Tessellation(params.side, params.d, rho0, floor=floor, params=params)


# --- BoxId-level convenience API --------------------------------------------

def box_of(vertex: WeightedVertex, tess: Tessellation) -> BoxId:
    code = tess.box_codes([vertex.pos.coords], [vertex.weight])[0]
    return tess.box_id(code)


def parent(box: BoxId, tess: Tessellation) -> BoxId:
    code = tess.code(box)
    if code == tess.top_code:
        raise InvalidInputError("TOP has no parent")
    return tess.box_id(tess.parent_codes([code])[0])


def children(box: BoxId, tess: Tessellation) -> set:
    return {tess.box_id(c) for c in tess.children_codes(tess.code(box))}


def b_neighbors(box: BoxId, tess: Tessellation) -> set:
    return {tess.box_id(c) for c in tess.neighbor_set(tess.code(box), "B")}


def gplus_neighbors(box: BoxId, tess: Tessellation) -> set:
    return {tess.box_id(c) for c in tess.neighbor_set(tess.code(box), "G")}


def is_active(box: BoxId, graph, tess: Tessellation) -> bool:
    code = tess.code(box)
    return bool(np.any(tess.box_codes(graph.positions, graph.weights) == code))


# --- cycle space --------------------------------------------------------------

def gamma_generator_codes(tess: Tessellation) -> list:
    """One cycle per same-level B-edge: a triangle through a shared parent, else a quadrilateral."""
    e = tess.b_edges
    lv = tess.levels_of(e[:, 0])
    same = e[lv == tess.levels_of(e[:, 1])]
    pa = tess.parent_codes(same[:, 0])
    pb = tess.parent_codes(same[:, 1])
    out = []
    for (a, b), p, q in zip(same.tolist(), pa.tolist(), pb.tolist()):
        out.append((a, p, b) if p == q else (a, p, q, b))
    return out


def gamma_generators(tess: Tessellation) -> list:
    return [tuple(tess.box_id(c) for c in cyc) for cyc in gamma_generator_codes(tess)]


def check_chordal_in_gplus(cycle, tess: Tessellation) -> bool:
    """True iff every pair of boxes on the cycle is G+-adjacent."""
    codes = [tess.code(b) if isinstance(b, BoxId) else int(b) for b in cycle]
    if len(set(codes)) != len(codes):
        return False
    pairs = list(itertools.combinations(codes, 2))
    if not pairs:
        return True
    a, b = np.array(pairs).T
    return bool(tess.adjacent(a, b, "G").all())


def chordal_all(tess: Tessellation, cycles_codes) -> np.ndarray:
    """Vectorised chordality test over many cycles (code tuples)."""
    a, b, owner = [], [], []
    for i, cyc in enumerate(cycles_codes):
        for x, y in itertools.combinations(cyc, 2):
            a.append(x)
            b.append(y)
            owner.append(i)
    ok = tess.adjacent(np.array(a), np.array(b), "G") & (np.array(a) != np.array(b))
    res = np.ones(len(cycles_codes), dtype=bool)
    np.logical_and.at(res, np.array(owner), ok)
    return res


def canonical_path_codes(tess: Tessellation, a: int, b: int) -> list:
    """Path between a and b in the parent-pointer spanning tree."""
    def chain(c):
        out = [int(c)]
        while out[-1] != tess.top_code:
            out.append(int(tess.parent_codes([out[-1]])[0]))
        return out
    ca, cb = chain(a), chain(b)
    on_b = {c: i for i, c in enumerate(cb)}
    for i, c in enumerate(ca):
        if c in on_b:
            return ca[:i + 1] + cb[:on_b[c]][::-1]
    raise AssertionError("parent chains always meet at TOP")


def cycle_space_generation_check(tess: Tessellation, limit: int = GF2_BOX_LIMIT) -> bool:
    """Do the generator cycles span every fundamental cycle of the parent tree over GF(2)?"""
    if tess.total > limit:
        raise SizeLimitError(f"{tess.total} boxes exceed the limit of {limit}")
    edges = [tuple(e) for e in tess.b_edges.tolist()]
    index = {e: i for i, e in enumerate(edges)}

    def edge_bits(path) -> int:
        bits = 0
        for x, y in zip(path, path[1:]):
            bits ^= 1 << index[(min(x, y), max(x, y))]
        return bits

    basis = {}  # leading bit -> reduced vector

    def reduce(v: int) -> int:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                return v
            v ^= basis[top]
        return 0

    for cyc in gamma_generator_codes(tess):
        v = reduce(edge_bits(list(cyc) + [cyc[0]]))
        if v:
            basis[v.bit_length() - 1] = v
    parents = tess.parent_codes(np.arange(tess.total))
    for a, b in edges:
        if parents[a] == b or parents[b] == a:
            continue
        cycle = canonical_path_codes(tess, a, b) + [a]
        if reduce(edge_bits(cycle)):
            return False
    return True


__all__ = [
    "BoxId", "Tessellation", "build_tessellation", "box_of", "parent", "children",
    "b_neighbors", "gplus_neighbors", "is_active", "gamma_generators", "gamma_generator_codes",
    "check_chordal_in_gplus", "chordal_all", "cycle_space_generation_check", "canonical_path_codes",
    "rho0_for",
]
