"""Sampling threshold GIRG instances.

Vertices come from a Poisson point process on the torus with Pareto weights
P(W >= x) = x**(1 - tau). Edges join u, v iff w_u * w_v >= dist(u, v)**d; with
edge_prob < 1 each qualifying pair is kept independently, using a
pair-keyed hash so that every construction makes the same decisions.
"""
from __future__ import annotations

import itertools
import logging

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .geometry import ModelParams, TorusPoint, WeightedVertex, connects_pairs, torus_side
from .graph import Graph, csr_from_edges

log = logging.getLogger(__name__)

_PAIR_CHUNK = 4_000_000
_ROW_CHUNK = 20_000


class GirgGraph(Graph):
    """A sampled graph: CSR adjacency plus vertex positions and weights."""

    def __init__(self, params: ModelParams, positions, weights, indptr, indices):
        super().__init__(indptr, indices)
        self.params = params
        self.positions = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, params.d)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.positions.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def side(self) -> float:
        return self.params.side

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def n(self) -> float:
        return self.params.n

    def vertex(self, i: int) -> WeightedVertex:
        return WeightedVertex(int(i), TorusPoint(self.positions[i]), float(self.weights[i]))

    @property
    def vertices(self) -> list:
        return [self.vertex(i) for i in range(self.num_vertices)]


def pareto_weights(u: np.ndarray, tau: float) -> np.ndarray:
    """Inverse-CDF transform: U ~ Unif[0,1) -> W with P(W >= x) = x**(1-tau)."""
    return (1.0 - np.asarray(u, dtype=np.float64)) ** (-1.0 / (tau - 1.0))


def sample_vertices(params: ModelParams, rng: np.random.Generator | None = None):
    """Poisson number of uniform torus points with i.i.d. Pareto weights.

    Returns (positions, weights) arrays of shapes (m, d) and (m,).
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    m = int(rng.poisson(params.lam * params.n))
    positions = rng.random((m, params.d)) * params.side
    # guard the (1 - 2**-53) * side rounding case
    positions[positions >= params.side] = 0.0
    weights = pareto_weights(rng.random(m), params.tau)
    return positions, weights


# --- pair-keyed retention -------------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def retention_uniforms(seed: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Deterministic U[0,1) per unordered pair, keyed by (seed, min id, max id)."""
    lo = np.minimum(a, b).astype(np.uint64)
    hi = np.maximum(a, b).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed) * _GOLDEN + _M2)
        h = _mix64(h ^ (lo * _GOLDEN))
        h = _mix64(h ^ (hi + _M1))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _retain(params: ModelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if params.edge_prob >= 1:
        return np.ones(len(a), dtype=bool)
    return retention_uniforms(params.seed, a, b) < params.edge_prob


def _make_graph(params, positions, weights, edges) -> GirgGraph:
    indptr, indices = csr_from_edges(len(weights), edges, unique=True)
    return GirgGraph(params, positions, weights, indptr, indices)


def build_edges_naive(positions, weights, params: ModelParams, rng=None) -> GirgGraph:
    """Test every pair. O(m^2); the oracle for `build_edges_grid`."""
    m = len(weights)
    pos = np.asarray(positions, dtype=np.float64).reshape(m, params.d)
    w = np.asarray(weights, dtype=np.float64)
    found = []
    rows_per_chunk = max(1, _PAIR_CHUNK // max(m, 1))
    for start in range(0, m, rows_per_chunk):
        ii = np.arange(start, min(m, start + rows_per_chunk))
        a = np.repeat(ii, m)
        b = np.tile(np.arange(m), len(ii))
        keep = a < b
        a, b = a[keep], b[keep]
        hit = connects_pairs(pos[a], w[a], pos[b], w[b], params.side, params.d)
        a, b = a[hit], b[hit]
        hit = _retain(params, a, b)
        found.append(np.stack([a[hit], b[hit]], axis=1))
    edges = np.concatenate(found) if found else np.empty((0, 2), dtype=np.int64)
    return _make_graph(params, pos, w, edges)


def _cell_pairs(cells_a, cells_b, n_cells: int, d: int, same: bool):
    """Yield candidate (i, j) index arrays whose cells differ by at most one per axis (with wrap).

    One batch per distinct cell offset; offsets are de-duplicated when the
    grid has at most two cells per axis.
    """
    strides = n_cells ** np.arange(d)
    key_b = cells_b @ strides
    order_b = np.argsort(key_b, kind="stable")
    sorted_b = key_b[order_b]
    axis_offsets = sorted({o % n_cells for o in (-1, 0, 1)})
    for off in itertools.product(axis_offsets, repeat=d):
        target = ((cells_a + np.array(off)) % n_cells) @ strides
        lo = np.searchsorted(sorted_b, target, side="left")
        cnt = np.searchsorted(sorted_b, target, side="right") - lo
        for s in range(0, len(cells_a), _ROW_CHUNK):
            c = cnt[s:s + _ROW_CHUNK]
            tot = int(c.sum())
            if tot == 0:
                continue
            ia = np.repeat(np.arange(s, s + len(c)), c)
            ib = order_b[np.repeat(lo[s:s + _ROW_CHUNK] - np.cumsum(c) + c, c) + np.arange(tot)]
            if same:
                keep = ia < ib
                ia, ib = ia[keep], ib[keep]
            yield ia, ib


def build_edges_grid(positions, weights, params: ModelParams, rng=None) -> GirgGraph:
    """Weight-layered cell lists; produces exactly the naive edge set.

    Vertices are split into layers floor(log2 w). For a pair of layers the
    largest possible connection radius r = (w_max_a * w_max_b)**(1/d) fixes a
    grid whose cells have side >= r, so only the 3^d surrounding cells can
    hold partners.
    """
    m = len(weights)
    d, side = params.d, params.side
    pos = np.asarray(positions, dtype=np.float64).reshape(m, d)
    w = np.asarray(weights, dtype=np.float64)
    if m < 2:
        return _make_graph(params, pos, w, np.empty((0, 2), dtype=np.int64))
    layer = np.floor(np.log2(w)).astype(np.int64)
    layer = np.maximum(layer, 0)
    members = {k: np.nonzero(layer == k)[0] for k in np.unique(layer)}
    found = []
    keys = sorted(members)
    for ai, ka in enumerate(keys):
        for kb in keys[ai:]:
            ia_all, ib_all = members[ka], members[kb]
            # layer k holds weights in [2^k, 2^(k+1)); pad the bound so rounding can't drop a pair
            wmax = float(w[ia_all].max()) * float(w[ib_all].max())
            radius = wmax ** (1.0 / d) * (1 + 1e-9)
            n_cells = int(side // radius) if radius > 0 else 1
            n_cells = max(1, min(n_cells, 1 << 20))
            cell = side / n_cells
            ca = np.minimum((pos[ia_all] // cell).astype(np.int64), n_cells - 1)
            cb = np.minimum((pos[ib_all] // cell).astype(np.int64), n_cells - 1)
            for sa, sb in _cell_pairs(ca, cb, n_cells, d, same=(ka == kb)):
                a, b = ia_all[sa], ib_all[sb]
                lo, hi = np.minimum(a, b), np.maximum(a, b)
                hit = connects_pairs(pos[lo], w[lo], pos[hi], w[hi], side, d)
                lo, hi = lo[hit], hi[hit]
                keep = _retain(params, lo, hi)
                found.append(np.stack([lo[keep], hi[keep]], axis=1).astype(np.int32))
    edges = np.concatenate(found) if found else np.empty((0, 2), dtype=np.int32)
    return _make_graph(params, pos, w, edges)


def sample_graph(params: ModelParams, method: str = "grid") -> GirgGraph:
    """Sample vertices and edges from `params.seed`."""
    rng = np.random.default_rng(params.seed)
    positions, weights = sample_vertices(params, rng)
    build = {"grid": build_edges_grid, "naive": build_edges_naive}[method]
    return build(positions, weights, params, rng)


def graph_from_vertices(params: ModelParams, positions, weights) -> GirgGraph:
    """Threshold graph on a hand-placed vertex set."""
    return build_edges_grid(np.asarray(positions, dtype=float), np.asarray(weights, dtype=float), params)


# --- degree tail ------------------------------------------------------------

def tail_exponent(samples, xmin: float | None = None, decades: float = 1.0):
    """Least-squares slope of the empirical log CCDF over [xmin, xmin * 10**decades].

    Returns the positive exponent a with P(X >= x) ~ x**(-a). When `xmin` is
    None it is the 90th percentile, i.e. the fit covers the top tenth of the
    sample and the decade of values above it.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    x = x[x > 0]
    if len(x) < 10:
        raise InsufficientDataError("need at least 10 positive samples for a tail fit")
    if xmin is None:
        xmin = float(np.quantile(x, 0.9))
    grid = np.geomspace(xmin, xmin * 10**decades, 25)
    ccdf = 1.0 - np.searchsorted(x, grid, side="left") / len(x)
    ok = ccdf > 0
    if ok.sum() < 3:
        raise InsufficientDataError("tail too thin to fit")
    slope, _ = np.polyfit(np.log(grid[ok]), np.log(ccdf[ok]), 1)
    return float(-slope)


def degree_tail_stats(graph: Graph, min_vertices: int = 10_000) -> float:
    """Tail exponent of the degree CCDF (estimates tau - 1)."""
    deg = graph.degrees()
    if graph.num_vertices < min_vertices:
        raise InsufficientDataError(f"need >= {min_vertices} vertices, got {graph.num_vertices}")
    if not (deg > 0).any():
        raise InsufficientDataError("all degrees are zero")
    return tail_exponent(deg[deg > 0])


# --- text format ------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_graph(graph: GirgGraph, fh) -> None:
    p = graph.params
    fh.write(f"girg d={p.d} lambda={_fmt(p.lam)} tau={_fmt(p.tau)} n={_fmt(p.n)} "
             f"seed={p.seed} p={_fmt(p.edge_prob)}\n")
    for i in range(graph.num_vertices):
        coords = " ".join(_fmt(c) for c in graph.positions[i])
        fh.write(f"v {i} {coords} {_fmt(graph.weights[i])}\n")
    for u, v in graph.edges():
        fh.write(f"e {u} {v}\n")


def read_graph(fh, d0_target: float | None = None) -> GirgGraph:
    header = fh.readline().split()
    if not header or header[0] != "girg":
        raise InvalidInputError("missing 'girg' header line")
    kv = dict(tok.split("=", 1) for tok in header[1:])
    try:
        params = ModelParams(
            d=int(kv["d"]), lam=float(kv["lambda"]), tau=float(kv["tau"]), n=float(kv["n"]),
            seed=int(kv["seed"]), edge_prob=float(kv["p"]),
            **({} if d0_target is None else {"d0_target": d0_target}),
        )
    except KeyError as exc:
        raise InvalidInputError(f"header lacks field {exc}") from None
    pos, wts, edges = [], [], []
    for lineno, line in enumerate(fh, start=2):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            if int(parts[1]) != len(wts) or len(parts) != params.d + 3:
                raise InvalidInputError(f"line {lineno}: malformed vertex record")
            pos.append([float(t) for t in parts[2:2 + params.d]])
            wts.append(float(parts[-1]))
        elif parts[0] == "e":
            u, v = int(parts[1]), int(parts[2])
            if not u < v:
                raise InvalidInputError(f"line {lineno}: edge endpoints must satisfy u < v")
            edges.append((u, v))
        else:
            raise InvalidInputError(f"line {lineno}: unknown record {parts[0]!r}")
    m = len(wts)
    indptr, indices = csr_from_edges(m, np.array(edges, dtype=np.int64).reshape(-1, 2))
    return GirgGraph(params, np.array(pos, dtype=float).reshape(m, params.d), np.array(wts), indptr, indices)


__all__ = [
    "GirgGraph", "sample_vertices", "build_edges_naive", "build_edges_grid", "sample_graph",
    "graph_from_vertices", "pareto_weights", "retention_uniforms", "degree_tail_stats",
    "tail_exponent", "write_graph", "read_graph", "torus_side",
]
