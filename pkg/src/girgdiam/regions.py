"""Canonical box paths, the inactive region W around them, its boundary S and holes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInputError
from .tessellation import BoxId, Tessellation, canonical_path_codes


def _code(tess: Tessellation, b) -> int:
    return tess.code(b) if isinstance(b, BoxId) else int(b)


def _codes(tess: Tessellation, boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        return np.unique(boxes.astype(np.int64))
    return np.unique(np.array([_code(tess, b) for b in boxes], dtype=np.int64))


def closed_neighborhood(tess: Tessellation, codes, kind: str = "G") -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    _, nb = tess.neighbors(codes, kind)
    return np.union1d(codes, nb)


def grow(tess: Tessellation, seeds, allowed: np.ndarray, kind: str = "G") -> np.ndarray:
    """All boxes reachable from `seeds` through boxes with allowed[code] true (seeds included)."""
    seen = np.zeros(tess.total, dtype=bool)
    frontier = np.unique(np.asarray(seeds, dtype=np.int64))
    seen[frontier] = True
    while len(frontier):
        _, nb = tess.neighbors(frontier, kind)
        nb = nb[allowed[nb] & ~seen[nb]]
        nb = np.unique(nb)
        seen[nb] = True
        frontier = nb
    return np.nonzero(seen)[0]


def complement_labels(tess: Tessellation, removed: np.ndarray, kind: str = "B") -> np.ndarray:
    """Component label of every box in the graph with `removed` boxes deleted; -1 for removed ones."""
    e = tess.b_edges if kind == "B" else tess.gplus_edges
    keep = ~removed[e[:, 0]] & ~removed[e[:, 1]]
    e = e[keep]
    a = coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(tess.total, tess.total))
    _, labels = connected_components(a, directed=False)
    labels = labels.astype(np.int64)
    labels[removed] = -1
    return labels


def is_connected(tess: Tessellation, codes, kind: str = "B") -> bool:
    """Does the set induce a connected subgraph?"""
    codes = np.unique(np.asarray(codes, dtype=np.int64))
    if len(codes) <= 1:
        return True
    allowed = np.zeros(tess.total, dtype=bool)
    allowed[codes] = True
    return len(grow(tess, codes[:1], allowed, kind)) == len(codes)


@dataclass
class Region:
    """W(B1, B2) and friends, all as sorted arrays of box codes."""
    tess: Tessellation
    source: int
    target: int
    canonical_path: list
    l_prime: np.ndarray
    w_set: np.ndarray
    s_set: np.ndarray
    _labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.w_set)

    @property
    def ws_size(self) -> int:
        return len(self.w_set) + len(self.s_set)

    def w_mask(self) -> np.ndarray:
        m = np.zeros(self.tess.total, dtype=bool)
        m[self.w_set] = True
        return m

    def ws_mask(self) -> np.ndarray:
        m = self.w_mask()
        m[self.s_set] = True
        return m

    def hole_labels(self) -> np.ndarray:
        """Hole label per box (B-components of the complement of W); -1 inside W."""
        if self._labels is None:
            self._labels = complement_labels(self.tess, self.w_mask(), "B")
        return self._labels

    def holes(self) -> list:
        lab = self.hole_labels()
        out = lab[lab >= 0]
        order = np.argsort(out, kind="stable")
        codes = np.nonzero(lab >= 0)[0][order]
        bounds = np.flatnonzero(np.diff(out[order])) + 1
        return np.split(codes, bounds)

    def visible_boundary_of_hole(self, hole_label: int) -> np.ndarray:
        lab = self.hole_labels()
        return self.s_set[lab[self.s_set] == hole_label]

    def box_ids(self, codes) -> list:
        return [self.tess.box_id(c) for c in codes]

    def dump(self, fh) -> None:
        """One box id per line, tagged L, LPRIME, W, S or HOLE:<k>."""
        t = self.tess
        for c in self.canonical_path:
            fh.write(f"{t.box_id(c)} L\n")
        for c in self.l_prime:
            fh.write(f"{t.box_id(c)} LPRIME\n")
        for c in self.w_set:
            fh.write(f"{t.box_id(c)} W\n")
        for c in self.s_set:
            fh.write(f"{t.box_id(c)} S\n")
        for k, h in enumerate(self.holes()):
            for c in h:
                fh.write(f"{t.box_id(c)} HOLE:{k}\n")


def canonical_path(tess: Tessellation, b1, b2) -> list:
    """Path between the two boxes in the parent-pointer tree; singleton when b1 == b2."""
    return [tess.box_id(c) for c in canonical_path_codes(tess, _code(tess, b1), _code(tess, b2))]


class RegionBuilder:
    """Computes regions for many pairs over one activity pattern.

    Inactive G+-components are labelled once, so each region only pays for
    its canonical path neighbourhood plus a label lookup.
    """

    def __init__(self, tess: Tessellation, active: np.ndarray):
        self.tess = tess
        self.active = np.asarray(active, dtype=bool)
        self._inactive_labels = None

    @property
    def inactive_labels(self) -> np.ndarray:
        if self._inactive_labels is None:
            self._inactive_labels = complement_labels(self.tess, self.active, "G")
        return self._inactive_labels

    def region(self, b1, b2) -> Region:
        tess, active = self.tess, self.active
        a, b = _code(tess, b1), _code(tess, b2)
        path = canonical_path_codes(tess, a, b)
        l_prime = closed_neighborhood(tess, path)
        around = closed_neighborhood(tess, l_prime)
        seeds = around[~active[around]]
        if len(seeds):
            lab = self.inactive_labels
            absorbed = np.nonzero(np.isin(lab, np.unique(lab[seeds])) & ~active)[0]
            w_set = np.union1d(l_prime, absorbed)
        else:
            w_set = l_prime
        _, nb = tess.neighbors(w_set, "G")
        s_set = np.setdiff1d(nb, w_set)
        return Region(tess, a, b, path, l_prime, w_set, s_set)


def compute_region(tess: Tessellation, active, b1, b2) -> Region:
    """Build L, L', W and S for a pair of boxes.

    `active` is a boolean mask over box codes (or a graph, from which the
    mask is derived). Inactive G+-components are absorbed into W when they
    meet L' or touch it, so that every box outside W next to W is active.
    """
    if not isinstance(active, np.ndarray):
        active = tess.active_mask(active)
    a, b = _code(tess, b1), _code(tess, b2)
    path = canonical_path_codes(tess, a, b)
    l_prime = closed_neighborhood(tess, path)
    around = closed_neighborhood(tess, l_prime)
    seeds = around[~active[around]]
    absorbed = grow(tess, seeds, ~active) if len(seeds) else np.empty(0, dtype=np.int64)
    w_set = np.union1d(l_prime, absorbed)
    _, nb = tess.neighbors(w_set, "G")
    s_set = np.setdiff1d(nb, w_set)
    return Region(tess, a, b, path, l_prime, w_set, s_set)


def visible_boundary_codes(tess: Tessellation, c_set, x) -> np.ndarray:
    c = _codes(tess, c_set)
    if len(c) == 0:
        raise InvalidInputError("visible boundary of an empty set is undefined")
    x = _code(tess, x)
    removed = np.zeros(tess.total, dtype=bool)
    removed[c] = True
    if removed[x]:
        raise InvalidInputError("viewpoint box lies inside the set")
    seen = grow(tess, [x], ~removed, "B")
    _, nb = tess.neighbors(c, "G")
    rim = np.setdiff1d(nb, c)
    return np.intersect1d(rim, seen)


def visible_boundary(tess: Tessellation, c_set, x) -> set:
    """G+-neighbours of c_set that x reaches by B-paths avoiding c_set."""
    return {tess.box_id(k) for k in visible_boundary_codes(tess, c_set, x)}


def verify_boundary_connected(tess: Tessellation, c_set, x) -> bool:
    return is_connected(tess, visible_boundary_codes(tess, c_set, x), "B")


# --- local shortcuts ----------------------------------------------------------

def _wrap_step(a: int, b: int, n: int) -> int:
    """Signed unit offset from a to b on a cycle of length n (0 when equal)."""
    diff = (b - a) % n
    if diff == 0:
        return 0
    return 1 if diff == 1 else -1


def _walk_same_level(tess: Tessellation, level: int, start, goal) -> list:
    """Fix disagreeing coordinates one at a time."""
    n = tess.n_cells(level)
    cur = np.array(start, dtype=np.int64)
    out = [int(tess.encode([level], [cur])[0])]
    for k in range(tess.d):
        step = _wrap_step(int(cur[k]), int(goal[k]), n)
        if step:
            cur[k] = (cur[k] + step) % n
            out.append(int(tess.encode([level], [cur])[0]))
    return out


def _nearest_child(tess: Tessellation, parent_code: int, level: int, target) -> np.ndarray:
    """Child coordinates of `parent_code` closest (per axis, with wrap) to `target` at `level`."""
    n = tess.n_cells(level)
    if parent_code == tess.top_code:
        base = np.zeros(tess.d, dtype=np.int64)
    else:
        base = tess.coords_of([parent_code])[0] * 2
    out = np.empty(tess.d, dtype=np.int64)
    for k in range(tess.d):
        best = None
        for o in (0, 1):
            c = (base[k] + o) % n
            g = min((c - target[k]) % n, (target[k] - c) % n)
            if best is None or g < best[0]:
                best = (g, c)
        out[k] = best[1]
    return out


def _shortcut_codes(tess: Tessellation, a: int, b: int) -> list:
    la, lb = (int(x) for x in tess.levels_of([a, b]))
    ca, cb = tess.coords_of([a, b])
    if la == lb:
        return _walk_same_level(tess, la, ca, cb)
    if lb == la + 1:
        if tess.parent_codes([a])[0] == b:
            return [a, b]
        child = _nearest_child(tess, b, la, ca)
        return _walk_same_level(tess, la, ca, child) + [b]
    # a is the higher box: drop into its nearest child, then walk across
    if tess.parent_codes([b])[0] == a:
        return [a, b]
    child = _nearest_child(tess, a, lb, cb)
    return [a] + _walk_same_level(tess, lb, child, cb)


def _detour_codes(tess: Tessellation, a: int, b: int) -> list:
    """B-path from a to b avoiding the B-edge {a, b}, inside the G+ ball of a."""
    la, lb = (int(x) for x in tess.levels_of([a, b]))
    if la == lb:
        pa, pb = (int(x) for x in tess.parent_codes([a, b]))
        return [a, pa, b] if pa == pb else [a, pa, pb, b]
    low = a if la < lb else b
    lvl = min(la, lb)
    c = tess.coords_of([low])[0]
    sib = c.copy()
    sib[0] = c[0] ^ 1  # the other child along axis 0 shares the parent
    s = int(tess.encode([lvl], [sib])[0])
    return [a, s, b]


def local_shortcut_path(tess: Tessellation, b1, b2, exclude_edge: bool = False) -> list:
    """B-path from b1 to b2 through boxes within G+-distance 1 of b1.

    Disagreeing coordinates are adjusted one at a time; across levels the
    path goes through a child of the higher box. When {b1, b2} is itself a
    B-edge the plain construction is that edge; with `exclude_edge` a detour
    through the parents (same level) or a sibling child (across levels) is
    returned instead.
    """
    a, b = _code(tess, b1), _code(tess, b2)
    if a == b or not tess.adjacent([a], [b], "G")[0]:
        raise InvalidInputError(f"{tess.box_id(a)} and {tess.box_id(b)} are not G+-adjacent")
    path = _shortcut_codes(tess, a, b)
    if exclude_edge and len(path) == 2:
        path = _detour_codes(tess, a, b)
    return [tess.box_id(c) for c in path]


__all__ = [
    "Region", "RegionBuilder", "canonical_path", "compute_region", "visible_boundary", "visible_boundary_codes",
    "verify_boundary_connected", "local_shortcut_path", "closed_neighborhood", "grow",
    "complement_labels", "is_connected",
]
