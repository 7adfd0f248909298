"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
happen; they are also repeated in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from acceptance_log import record
from girgdiam import cli
from girgdiam.diameter import exact_diameter, ifub_diameter
from girgdiam.experiments import (ExperimentConfig, boundary_suite, chordal_suite, crossing_suite,
                                  cycle_space_suite, random_vertex_pairs, region_sizes, run_scaling,
                                  sample_vertex_set, walk_suite)
from girgdiam.geometry import ModelParams
from girgdiam.graph import Graph
from girgdiam.lowerbound import (check_gray_invariants, discretized_gap, gray_code, gray_curve,
                                 scan_long_low_weight_component)
from girgdiam.sampler import build_edges_grid, build_edges_naive, sample_graph, sample_vertices
from girgdiam.tessellation import Tessellation, build_tessellation
from girgdiam.towers import CoarseRegions
from oracles import brute_box_edges

pytestmark = pytest.mark.slow


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start

    def within(self, limit):
        return self.seconds < limit


def finish(number, title, ok, detail, clock, limit):
    in_time = clock.within(limit)
    if not in_time:
        detail += f"; over the {limit:.0f}s budget"
    line = record(number, title, ok and in_time, detail, clock.seconds)
    assert ok and in_time, line


def test_sampler_fidelity():
    with Clock() as c:
        counts, weights = [], []
        for seed in range(100):
            p = ModelParams(d=2, lam=1, tau=2.5, n=2**14, seed=seed)
            _, w = sample_vertices(p)
            counts.append(len(w))
            weights.append(w)
        counts = np.array(counts, dtype=float)
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        count_ok = abs(counts.mean() - 2**14) <= 3 * se
        w = np.concatenate(weights)
        bands = []
        for x in (2, 4, 8, 16):
            k = int((w >= x).sum())
            lo, hi = stats.binom.interval(0.99, len(w), x ** (1 - 2.5))
            bands.append((x, k, lo, hi, lo <= k <= hi))
    ok = count_ok and all(b[-1] for b in bands)
    detail = (f"mean count {counts.mean():.1f} vs {2**14} (3 SE = {3 * se:.1f}); tail counts "
              + ", ".join(f"x={x}:{k} in [{lo:.0f},{hi:.0f}]" for x, k, lo, hi, _ in bands))
    finish(1, "sampler fidelity", ok, detail, c, 120)


def test_edge_construction_oracle():
    rng = np.random.default_rng(2024)
    bad = []
    with Clock() as c:
        for i in range(100):
            d = (1, 2, 3)[i % 3]
            tau = float(rng.uniform(2.1, 3.5))
            lam = float(rng.choice([0.5, 1.0, 2.0]))
            n = int(rng.integers(50, 1500))
            p = ModelParams(d=d, lam=lam, tau=tau, n=n, seed=i)
            pos, w = sample_vertices(p)
            pos, w = pos[:2000], w[:2000]
            fast = build_edges_grid(pos, w, p).edges()
            slow = build_edges_naive(pos, w, p).edges()
            if not np.array_equal(fast, slow):
                bad.append(i)
    finish(2, "grid edges equal naive edges", not bad,
           f"{100 - len(bad)}/100 instances identical" + (f", mismatches {bad}" if bad else ""), c, 60)


def test_tessellation_invariants():
    with Clock() as c:
        p = ModelParams(d=2, lam=1, tau=2.5, n=10**6, seed=5)
        pos, w = sample_vertices(p)
        t = build_tessellation(p)
        codes = t.box_codes(pos, w)
        # count every box level whose weight band holds the vertex, then check the cell geometrically
        hits = np.zeros(len(w), dtype=np.int64)
        for level in t.levels:
            lo, hi = t.weight_range(level)
            hits += (w >= lo) & (w < hi)
        lv = t.levels_of(codes)
        cells = t.coords_of(codes, lv)
        sides = np.array([t.box_side(int(x)) for x in range(t.rho0 + 1)])[lv]
        inside = (cells * sides[:, None] <= pos) & (pos < (cells + 1) * sides[:, None])
        band_lo = 2.0 ** (t.d * lv / 2)
        band_hi = np.where(lv == t.rho0, np.inf, 2.0 ** (t.d * (lv + 1) / 2))
        unmapped = int(((codes < 0) | (codes >= t.total)).sum()) + int((hits == 0).sum())
        doubled = int((hits > 1).sum())
        misplaced = int((~inside.all(axis=1) | (w < band_lo) | (w >= band_hi)).sum())
        counts_ok = all(t.level_count(l) == (1 if l == t.rho0 else 4 ** (t.rho0 - l)) for l in t.levels)
        adj_bad = []
        for d in (1, 2, 3):
            for r in range(1, 5):
                tt = Tessellation(0.25 * 2**r, d, r)
                b, g = brute_box_edges(tt)
                mine_b = set(map(tuple, tt.b_edges.tolist()))
                mine_g = set(map(tuple, tt.gplus_edges.tolist()))
                sym = True
                for kind in ("B", "G"):
                    src, nb = tt.neighbors(np.arange(tt.total), kind)
                    fwd = set(zip(src.tolist(), nb.tolist()))
                    sym &= fwd == {(y, x) for x, y in fwd}
                if not (mine_b == b and mine_g == g and b <= g and sym):
                    adj_bad.append((d, r))
    ok = unmapped == 0 and doubled == 0 and misplaced == 0 and counts_ok and not adj_bad
    detail = (f"{len(w)} vertices: {unmapped} unmapped, {doubled} doubly mapped, {misplaced} misplaced; "
              f"level counts {'exact' if counts_ok else 'WRONG'}; adjacency shapes failing: {adj_bad or 'none'}")
    finish(3, "tessellation invariants", ok, detail, c, 60)


def test_cycle_space_machinery():
    with Clock() as c:
        chord = chordal_suite()
        gen = cycle_space_suite(((1, 3), (2, 2)))
    ok = chord.failures == 0 and gen.failures == 0
    detail = f"{chord.instances - chord.failures}/{chord.instances} generators chordal; GF(2) checks {gen.instances - gen.failures}/{gen.instances}"
    finish(4, "cycle-space machinery", ok, detail, c, 60)


def test_box_crossing():
    with Clock() as c:
        r = crossing_suite(d0=0.25, edge_prob=1.0, dims=(1, 2, 3), min_instances=10_000)
    ok = r.instances >= 10_000 and r.failures == 0 and r.hard
    finish(5, "box crossing", ok, f"{r.failures} anchor failures over {r.instances} instances", c, 300)


def test_boundary_connectivity():
    with Clock() as c:
        r = boundary_suite(cases=1000, seed=0)
    ok = r.instances == 1000 and r.failures == 0
    finish(6, "boundary connectivity", ok, f"{r.instances - r.failures}/{r.instances} boundaries connected", c, 120)


def test_confined_walks():
    with Clock() as c:
        r = walk_suite(n=2**12, lam=32.0, tau=3.0, d=2, pairs=500, seed=0, max_constant=20.0)
    ok = r.instances == 500 and r.failures == 0
    finish(7, "confined walks", ok, f"{r.failures} invalid of {r.instances}; {r.note}", c, 600)


def _max_region_ratio(make_regions, pairs=200):
    ratios = []
    for e in range(10, 15):
        sizes = make_regions(2**e, pairs)
        ratios.append(max(sizes) / e)
    return ratios


def test_region_size_bound():
    with Clock() as c:
        def boxes(n, pairs):
            p = ModelParams(d=2, lam=32, tau=3, n=n, d0_target=0.5, seed=0)
            g = sample_vertex_set(p)
            t = build_tessellation(p)
            return region_sizes(t, t.active_mask(g), g, random_vertex_pairs(g, pairs, np.random.default_rng(0)))

        def tower_mode(n, pairs):
            p = ModelParams(d=2, lam=1, tau=2.5, n=n, d0_target=0.25, seed=0)
            g = sample_graph(p)
            cr = CoarseRegions(build_tessellation(p), g, cutoff=3)
            return [cr.region_for_vertices(u, v).size
                    for u, v in random_vertex_pairs(g, pairs, np.random.default_rng(0))]

        box_r = _max_region_ratio(boxes)
        tow_r = _max_region_ratio(tower_mode)
    box_ok = box_r[-1] <= 1.25 * box_r[0]
    tow_ok = tow_r[-1] <= 1.25 * tow_r[0]
    fmt = lambda rs: ", ".join(f"{r:.1f}" for r in rs)  # noqa: E731
    detail = (f"max |W|/log2 n over n=2^10..2^14: boxes (tau=3, lambda=32) [{fmt(box_r)}] "
              f"{'ok' if box_ok else 'grows'}; towers (tau=2.5, lambda=1, cutoff 3) [{fmt(tow_r)}] "
              f"{'ok' if tow_ok else 'grows'}")
    finish(8, "region size bound", box_ok and tow_ok, detail, c, 900)


def test_diameter_scaling():
    with Clock() as c:
        cfg = ExperimentConfig(command="scaling", n=[2**e for e in range(10, 17)], tau=[2.5], lam=[1.0], d=[2],
                               seeds=5)
        rows, fit = run_scaling(cfg)
    worst = max(r[4] for r in rows if r[5])
    ok = fit.r2 >= 0.8 and fit.slope > 0 and worst <= 40 and all(r[5] for r in rows)
    detail = f"slope {fit.slope:.3f}, R^2 {fit.r2:.3f} (needs >= 0.8), max diameter/log2 n {worst:.3f}"
    finish(9, "diameter scaling", ok, detail, c, 1200)


def test_lower_bound_machinery():
    with Clock() as c:
        gray_ok = all(check_gray_invariants(gray_code(M, d), M) for M in range(2, 7) for d in range(1, 5))
        gaps = []
        for M in range(2, 6):
            _, certified = discretized_gap(gray_curve(None, M, 1.0, 2), samples=41)
            gaps.append(certified)
        gap_ok = min(gaps) >= 0.4
        means = {}
        for e in (12, 16):
            best = []
            for seed in range(10):
                g = sample_graph(ModelParams(d=2, lam=0.1, tau=2.5, n=2**e, seed=seed))
                found = scan_long_low_weight_component(g)
                best.append(found[1] if found else 0)
            means[e] = float(np.mean(best))
        grow_ok = means[16] - means[12] >= 1
    ok = gray_ok and gap_ok and grow_ok
    detail = (f"gray invariants {'hold' if gray_ok else 'FAIL'}; certified gap/s min {min(gaps):.3f}; "
              f"mean longest low-weight diameter {means[12]:.1f} at 2^12 vs {means[16]:.1f} at 2^16 (lambda=0.1)")
    finish(10, "lower-bound machinery", ok, detail, c, 600)


def _synthetic(rng, i):
    n = int(rng.integers(2, 120))
    kind = i % 4
    if kind == 0:
        m = int(rng.integers(0, 3 * n))
        e = rng.integers(0, n, size=(m, 2))
        e = e[e[:, 0] != e[:, 1]]
    elif kind == 1:
        e = np.array([(v, int(rng.integers(v))) for v in range(1, n)]).reshape(-1, 2)
    elif kind == 2:
        e = np.array([(v, (v + 1) % n) for v in range(n)] if n > 2 else [(0, 1)]).reshape(-1, 2)
    else:
        k = max(1, int(math.sqrt(n)))
        n = k * k
        e = [(r * k + q, r * k + q + 1) for r in range(k) for q in range(k - 1)]
        e += [(r * k + q, (r + 1) * k + q) for r in range(k - 1) for q in range(k)]
        e = np.array(e or [(0, 0)]).reshape(-1, 2)
        e = e[e[:, 0] != e[:, 1]]
    return Graph.from_edges(n, e)


def test_diameter_algorithms():
    rng = np.random.default_rng(11)
    bad = 0
    with Clock() as c:
        for i in range(100):
            if i < 50:
                d = (1, 2, 3)[i % 3]
                g = sample_graph(ModelParams(d=d, lam=float(rng.choice([0.5, 1.0, 2.0])),
                                             tau=float(rng.uniform(2.2, 3.2)), n=int(rng.integers(100, 800)),
                                             seed=i))
            else:
                g = _synthetic(rng, i)
            ex, fast = exact_diameter(g), ifub_diameter(g)
            bad += not (ex.overall == fast.overall and ex.components == fast.components)
    finish(11, "iFUB equals exact", bad == 0, f"{100 - bad}/100 graphs agree (50 sampled, 50 synthetic)", c, 120)


DETERMINISM = [
    ["sample", "--n", "4096", "--seed", "7", "-o", "{out}"],
    ["scaling", "--n", "256", "512", "1024", "2048", "--seeds", "3", "--seed", "4", "-o", "{out}", "--json", "{js}"],
    ["verify", "--quick", "--p", "0.5", "--seed", "1", "--json", "{js}"],
    ["towers", "--n", "1024", "--lambda", "2", "--seeds", "2", "--seed", "9", "-o", "{out}", "--json", "{js}"],
    ["lowerbound", "--n", "4096", "--lambda", "0.2", "--seeds", "3", "--seed", "2", "-o", "{out}", "--json", "{js}"],
    ["route", "--n", "1024", "--lambda", "2", "--pairs", "30", "--seed", "3", "-o", "{out}", "--json", "{js}"],
]


def test_determinism(tmp_path, capsys):
    differing = []
    with Clock() as c:
        for argv in DETERMINISM:
            outs = []
            for rep in range(2):
                out, js = tmp_path / f"{argv[0]}{rep}.out", tmp_path / f"{argv[0]}{rep}.json"
                code = cli.main([a.format(out=out, js=js) for a in argv])
                stdout = capsys.readouterr().out
                outs.append((code, stdout, out.read_bytes() if out.exists() else b"",
                             js.read_bytes() if js.exists() else b""))
            if outs[0] != outs[1] or outs[0][0] != 0:
                differing.append(argv[0])
    finish(12, "determinism", not differing,
           f"{len(DETERMINISM) - len(differing)}/{len(DETERMINISM)} commands byte-identical across two runs"
           + (f"; differing: {differing}" if differing else ""), c, 120)
