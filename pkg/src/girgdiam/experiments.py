"""Experiment drivers shared by the command line: sweeps, verification suites, CSV output."""
from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .diameter import ifub_diameter
from .errors import GirgError, InvalidInputError, LemmaViolationError
from .geometry import ModelParams
from .graph import INF, bounded_distance
from .lowerbound import scan_long_low_weight_component
from .regions import verify_boundary_connected
from .router import MAX_HOP, Router, VertexBoxes, crossing_anchor, shadow_codes, validate_walk
from .sampler import sample_graph, sample_vertices
from .tessellation import (Tessellation, build_tessellation, chordal_all, cycle_space_generation_check,
                           gamma_generator_codes)
from .towers import DEFAULT_C3, DEFAULT_EPS, TowerAnalyzer

BUILD_ID = "v" + __version__


@dataclass
class ExperimentConfig:
    command: str
    n: list = field(default_factory=lambda: [4096])
    tau: list = field(default_factory=lambda: [2.5])
    lam: list = field(default_factory=lambda: [1.0])
    d: list = field(default_factory=lambda: [2])
    seed: int = 0
    seeds: int = 1
    edge_prob: float = 1.0
    d0_target: float = 0.25
    cutoffs: list = field(default_factory=list)
    eps: float = DEFAULT_EPS
    c3: float = DEFAULT_C3
    pairs: int = 100
    weight_cap: float | None = None
    output: str | None = None

    def __post_init__(self):
        for name in ("n", "tau", "lam", "d"):
            if not getattr(self, name):
                raise InvalidInputError(f"parameter list '{name}' is empty")
        if self.seeds < 1:
            raise InvalidInputError(f"seeds must be >= 1, got {self.seeds}")
        if self.pairs < 0:
            raise InvalidInputError("pairs must be non-negative")

    def points(self) -> list:
        """All (d, tau, lam, n, seed) trials in sorted order; seeds are seed + trial index."""
        out = []
        for d in sorted(self.d):
            for tau in sorted(self.tau):
                for lam in sorted(self.lam):
                    for n in sorted(self.n):
                        for t in range(self.seeds):
                            out.append((d, tau, lam, n, self.seed + t))
        return out

    def params(self, d, tau, lam, n, seed) -> ModelParams:
        return ModelParams(d=d, lam=lam, tau=tau, n=n, d0_target=min(self.d0_target, 0.5),
                           edge_prob=self.edge_prob, seed=seed)

    def echo(self) -> str:
        cfg = {k: v for k, v in asdict(self).items() if k != "output"}
        return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GIRG_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(fn, trials) -> list:
    """fn over every trial, results returned in trial order whatever the thread count."""
    k = thread_count()
    if k == 1:
        return [fn(t) for t in trials]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, trials))


def csv_text(config: ExperimentConfig, header: list, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# girgdiam {BUILD_ID} config={config.echo()}\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_cell(x) for x in r) + "\n")
    return buf.getvalue()


def _cell(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return "" if math.isnan(x) else format(x, ".10g")
    return str(x)


# --- scaling -----------------------------------------------------------------

@dataclass
class FitResult:
    slope: float
    intercept: float
    r2: float
    points: int
    flat: bool

    def as_dict(self) -> dict:
        return {"slope": float(self.slope), "intercept": float(self.intercept), "r2": float(self.r2),
                "points": int(self.points), "flat": bool(self.flat)}


def fit_log_scaling(ns, diameters, flat_tol: float = 1e-9) -> FitResult:
    """Least squares diameter = a*log2(n) + b. Needs at least two distinct n.

    A fit whose diameters do not vary is flagged `flat` and given R^2 = 0.
    """
    x = np.log2(np.asarray(ns, dtype=np.float64))
    y = np.asarray(diameters, dtype=np.float64)
    if len(np.unique(x)) < 2:
        raise InvalidInputError("the scaling fit needs at least two distinct values of n")
    if np.ptp(y) <= flat_tol:
        return FitResult(0.0, float(y.mean()), 0.0, len(y), True)
    res = stats.linregress(x, y)
    return FitResult(float(res.slope), float(res.intercept), float(res.rvalue ** 2), len(y),
                     bool(abs(res.slope) <= flat_tol))


def scaling_trial(config: ExperimentConfig, point):
    d, tau, lam, n, seed = point
    try:
        g = sample_graph(config.params(d, tau, lam, n, seed))
        size, diam = ifub_diameter(g, largest_only=True).components[0]
        return (n, seed, int(size), int(diam), diam / math.log2(n), 1)
    except (GirgError, MemoryError):
        return (n, seed, 0, 0, float("nan"), 0)


def run_scaling(config: ExperimentConfig):
    if len(set(config.n)) < 4 or config.seeds < 3:
        raise InvalidInputError("scaling needs at least 4 values of n and 3 seeds")
    rows = run_trials(lambda p: scaling_trial(config, p), config.points())
    good = [r for r in rows if r[5]]
    fit = fit_log_scaling([r[0] for r in good], [r[3] for r in good])
    return rows, fit


# --- verification suites -------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    instances: int
    failures: int
    hard: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.failures == 0 or not self.hard

    def line(self) -> str:
        status = "PASS" if self.failures == 0 else ("FAIL" if self.hard else "WARN")
        extra = f" ({self.note})" if self.note else ""
        return f"{status} {self.name}: {self.failures} failures over {self.instances} instances{extra}"


def exact_d0_params(d: int, rho0: int, d0: float, lam: float, tau: float, seed: int,
                    edge_prob: float = 1.0) -> ModelParams:
    """Parameters whose torus side is d0 * 2**rho0, so the tessellation has D0 = d0 exactly."""
    side = d0 * 2 ** rho0
    return ModelParams(d=d, lam=lam, tau=tau, n=side ** d, d0_target=min(d0, 0.5),
                       edge_prob=edge_prob, seed=seed)


def crossing_instances(tess: Tessellation, graph, max_edges: int | None = None, rng=None):
    """Yields (edge, crossed box code, anchor or None) for active boxes strictly crossed by an edge.

    The endpoints' own boxes are skipped, they contain an endpoint already.
    """
    index = VertexBoxes(tess, graph)
    edges = graph.edges()
    if max_edges is not None and len(edges) > max_edges:
        rng = rng or np.random.default_rng(0)
        edges = edges[np.sort(rng.choice(len(edges), max_edges, replace=False))]
    for x, y in edges:
        x, y = int(x), int(y)
        own = (index.codes[x], index.codes[y])
        for c in shadow_codes(tess, graph.positions[x], graph.weights[x], graph.positions[y], graph.weights[y]):
            if c in own or not index.active[c]:
                continue
            try:
                z = crossing_anchor(tess, graph, (x, y), c, index)
            except LemmaViolationError:
                z = None
            yield (x, y), c, z


CROSSING_CONFIGS = {1: (9, 8.0), 2: (5, 4.0), 3: (3, 4.0)}  # d -> (rho0, lambda)


def crossing_suite(d0: float = 0.25, edge_prob: float = 1.0, dims=(1, 2, 3), tau: float = 2.5,
                   seed: int = 0, min_instances: int = 10_000, max_edges: int = 4000) -> SuiteResult:
    total = fails = 0
    for d in dims:
        rho0, lam = CROSSING_CONFIGS[d]
        count, s = 0, seed
        while count < min_instances // len(dims):
            p = exact_d0_params(d, rho0, d0, lam, tau, s, edge_prob)
            g = sample_graph(p)
            tess = build_tessellation(p, d0_target=d0)
            for _, _, z in crossing_instances(tess, g, max_edges, np.random.default_rng(s)):
                count += 1
                fails += z is None
            s += 1
            if s - seed > 50:
                break
        total += count
    counting = edge_prob < 1
    note = "counting mode, edges are retained with probability < 1" if counting else ""
    return SuiteResult("box-crossing", total, fails, hard=not counting, note=note)


def random_gplus_connected(tess: Tessellation, size: int, rng) -> np.ndarray:
    """Random G+-connected box set grown from a random box."""
    start = int(rng.integers(tess.total))
    chosen = [start]
    inside = {start}
    frontier = set(int(c) for c in tess.neighbors([start], "G")[1]) - inside
    while len(chosen) < size and frontier:
        nxt = sorted(frontier)[int(rng.integers(len(frontier)))]
        chosen.append(nxt)
        inside.add(nxt)
        frontier.discard(nxt)
        frontier |= set(int(c) for c in tess.neighbors([nxt], "G")[1]) - inside
    return np.array(chosen, dtype=np.int64)


BOUNDARY_SHAPES = {1: 5, 2: 3, 3: 2}  # d -> rho0


def boundary_suite(cases: int = 1000, seed: int = 0, dims=(1, 2, 3), max_size: int = 40) -> SuiteResult:
    rng = np.random.default_rng(seed)
    fails = 0
    tess = {d: Tessellation(0.25 * 2 ** r, d, r) for d, r in BOUNDARY_SHAPES.items() if d in dims}
    for i in range(cases):
        t = tess[dims[i % len(dims)]]
        c = random_gplus_connected(t, int(rng.integers(1, min(max_size, t.total - 1) + 1)), rng)
        rest = np.setdiff1d(np.arange(t.total), c)
        x = int(rest[rng.integers(len(rest))])
        fails += not verify_boundary_connected(t, c, x)
    return SuiteResult("boundary-connectivity", cases, fails)


CHORDAL_SHAPES = [(d, r) for d in (1, 2, 3) for r in range(1, 5) if not (d == 3 and r == 4)] + [(3, 4)]


def chordal_suite(shapes=CHORDAL_SHAPES) -> SuiteResult:
    total = fails = 0
    for d, r in shapes:
        t = Tessellation(0.25 * 2 ** r, d, r)
        gens = gamma_generator_codes(t)
        ok = chordal_all(t, gens)
        total += len(ok)
        fails += int((~ok).sum())
    return SuiteResult("gamma-chordality", total, fails)


def cycle_space_suite(shapes=((1, 3), (2, 2))) -> SuiteResult:
    fails = sum(not cycle_space_generation_check(Tessellation(0.25 * 2 ** r, d, r)) for d, r in shapes)
    return SuiteResult("cycle-space-generation", len(shapes), fails)


def connected_pairs(graph, count: int, rng) -> list:
    """Random pairs inside the largest component (distinct endpoints)."""
    from .graph import components
    lab = components(graph)
    members = lab.members(lab.largest)
    if len(members) < 2:
        return []
    out = []
    for _ in range(count):
        u, v = rng.choice(members, 2, replace=False)
        out.append((int(u), int(v)))
    return out


def route_rows(tess: Tessellation, graph, pairs) -> list:
    """Certification rows u,v,dist,walk_length,max_hop,ws_size,constant,excursions,problems."""
    router = Router(tess, graph)
    rows = []
    for u, v in pairs:
        w = router.walk(u, v)
        probs = validate_walk(tess, graph, w)
        rows.append((u, v, _dist(graph, u, v), w.length, max(w.hops, default=0), w.region.ws_size,
                     w.constant, w.excursions, len(probs)))
    return rows


def _dist(graph, u, v) -> int:
    from .graph import shortest_path
    return len(shortest_path(graph, u, v)) - 1


def walk_suite(n: int = 1024, lam: float = 32.0, tau: float = 3.0, d: int = 2, pairs: int = 50,
               seed: int = 0, d0_target: float = 0.25, max_constant: float = 20.0) -> SuiteResult:
    p = ModelParams(d=d, lam=lam, tau=tau, n=n, d0_target=d0_target, seed=seed)
    g = sample_graph(p)
    tess = build_tessellation(p)
    rows = route_rows(tess, g, connected_pairs(g, pairs, np.random.default_rng(seed)))
    fails = sum(1 for r in rows if r[8] or r[4] > MAX_HOP or r[6] > max_constant)
    worst = max((r[6] for r in rows), default=0.0)
    return SuiteResult("confined-walk", len(rows), fails, note=f"max length/|W u S| = {worst:.3g}")


def region_sizes(tess: Tessellation, active: np.ndarray, graph, pairs, builder=None) -> list:
    from .regions import RegionBuilder
    builder = builder or RegionBuilder(tess, active)
    codes = tess.box_codes(graph.positions, graph.weights)
    return [builder.region(codes[u], codes[v]).size for u, v in pairs]


@dataclass
class VertexSample:
    """Positions and weights without edges; enough for box activity."""
    positions: np.ndarray
    weights: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.weights)


def sample_vertex_set(params: ModelParams) -> VertexSample:
    # same stream as sample_graph, so the vertices match the full graph for this seed
    return VertexSample(*sample_vertices(params, np.random.default_rng(params.seed)))


def random_vertex_pairs(graph, count: int, rng) -> list:
    m = graph.num_vertices
    if m < 2:
        return []
    return [tuple(int(x) for x in rng.choice(m, 2, replace=False)) for _ in range(count)]


def region_suite(ns=(1024, 2048), lam: float = 32.0, tau: float = 3.0, d: int = 2, pairs: int = 50,
                 seed: int = 0, d0_target: float = 0.5, ceiling: float | None = None) -> SuiteResult:
    """Max |W|/log2(n) per n. Hard only when a ceiling is given."""
    ratios = []
    for n in ns:
        p = ModelParams(d=d, lam=lam, tau=tau, n=n, d0_target=d0_target, seed=seed)
        g = sample_vertex_set(p)
        tess = build_tessellation(p)
        sizes = region_sizes(tess, tess.active_mask(g), g, random_vertex_pairs(g, pairs, np.random.default_rng(seed)))
        ratios.append(max(sizes) / math.log2(n))
    fails = 0 if ceiling is None else sum(r > ceiling for r in ratios)
    note = "max |W|/log2 n: " + ", ".join(f"{n}:{r:.2f}" for n, r in zip(ns, ratios))
    return SuiteResult("region-size", len(ns), fails, hard=ceiling is not None, note=note)


def verify_all(config: ExperimentConfig, quick: bool = False) -> list:
    d0 = config.d0_target
    scale = 0.2 if quick else 1.0
    res = [
        crossing_suite(d0=d0, edge_prob=config.edge_prob, seed=config.seed,
                       min_instances=int(10_000 * scale)),
        boundary_suite(cases=int(1000 * scale), seed=config.seed),
        chordal_suite(),
        cycle_space_suite(),
    ]
    if config.edge_prob == 1.0:
        res.append(walk_suite(pairs=int(50 * scale), seed=config.seed))
        res.append(region_suite(pairs=int(50 * scale), seed=config.seed))
    return res


# --- towers and lower bound ------------------------------------------------------

def tower_rows(config: ExperimentConfig, point) -> tuple:
    d, tau, lam, n, seed = point
    p = config.params(d, tau, lam, n, seed)
    g = sample_graph(p)
    tess = build_tessellation(p, d0_target=config.d0_target)
    rows, rates = [], {}
    cutoffs = config.cutoffs or list(range(tess.rho0))
    for i in cutoffs:
        if not 0 <= i < tess.rho0:
            continue
        an = TowerAnalyzer(tess, g, i, config.eps, config.c3)
        c1 = an.cond1_all()
        act = an.active_all()
        for t in range(len(c1)):
            idx = "-".join(str(j) for j in an.el.box_id(t + an.el.level_offset(i)).index)
            if c1[t]:
                r = an.report(t)
                c2, c3 = r.cond2, r.cond3
            else:
                c2 = c3 = False  # not evaluated when condition 1 fails
            rows.append((seed, n, i, idx, bool(c1[t]), c2, c3, bool(act[t])))
        rates[i] = float(act.mean())
    return rows, rates


def lowerbound_row(config: ExperimentConfig, point) -> tuple:
    d, tau, lam, n, seed = point
    g = sample_graph(config.params(d, tau, lam, n, seed))
    found = scan_long_low_weight_component(g, config.weight_cap)
    comp, diam = found if found else (-1, 0)
    return (n, seed, comp, diam, diam / math.log2(n))


def certify_hops(graph, walk_vertices) -> int:
    worst = 0
    for a, b in zip(walk_vertices, walk_vertices[1:]):
        worst = max(worst, bounded_distance(graph, a, b, MAX_HOP))
    return worst if worst != INF else -1


__all__ = [
    "BUILD_ID", "ExperimentConfig", "FitResult", "SuiteResult", "fit_log_scaling", "run_scaling",
    "crossing_suite", "boundary_suite", "chordal_suite", "cycle_space_suite", "walk_suite", "region_suite",
    "verify_all", "tower_rows", "lowerbound_row", "route_rows", "csv_text", "run_trials", "exact_d0_params",
    "crossing_instances", "random_gplus_connected", "VertexSample", "sample_vertex_set", "connected_pairs", "random_vertex_pairs", "region_sizes",
]
