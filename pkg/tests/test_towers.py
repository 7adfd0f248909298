import io
import math

import numpy as np
import pytest

from girgdiam.errors import InvalidInputError
from girgdiam.geometry import ModelParams, TorusPoint, WeightedVertex
from girgdiam.regions import closed_neighborhood, compute_region
from girgdiam.sampler import graph_from_vertices, sample_graph
from girgdiam.tessellation import BoxId, Tessellation, build_tessellation
from girgdiam.towers import (CoarseRegions, TowerAnalyzer, TowerId, compute_region_coarse, element_tessellation,
                             eps_level, geometric_diameter, is_active_tower, tower_activity_rate, tower_of,
                             towers, write_activity_csv)
from oracles import brute_box_edges


def line_params(side, d0=0.25):
    return ModelParams(d=1, lam=1, tau=2.5, n=side, d0_target=d0)


def dense_instance(side=4.0, d0=0.25):
    """One vertex at the centre of every box, weight just above its level's floor."""
    p = line_params(side, d0)
    t = build_tessellation(p)
    pos, w = [], []
    for level in range(t.rho0):
        s = t.box_side(level)
        for j in range(t.n_cells(level)):
            pos.append([(j + 0.5) * s])
            w.append(t.weight_range(level)[0] * 1.01)
    pos.append([0.0])
    w.append(t.weight_range(t.rho0)[0] * 1.01)
    return t, graph_from_vertices(p, pos, w)


def test_tower_counts():
    t = Tessellation(16.0, 1, 5)
    assert len(towers(t, 2)) == 8
    assert [x.index for x in towers(t, 0)] == [t.box_id(c).index for c in t.level_codes(0)]
    el = element_tessellation(t, 2)
    # each tower spans its level-2 cell plus 2 + 4 cells below it
    assert t.n_cells(0) // el.n_cells(2) + t.n_cells(1) // el.n_cells(2) == 6
    with pytest.raises(InvalidInputError):
        towers(t, 5)
    with pytest.raises(InvalidInputError):
        towers(t, -1)


def test_tower_of():
    t = Tessellation(16.0, 1, 5)
    assert tower_of(WeightedVertex(0, TorusPoint((3.3,)), 1.0), t, 2) == TowerId(2, (2,))
    assert tower_of(WeightedVertex(0, TorusPoint((5.0,)), 2.5), t, 2) == TowerId(2, (3,))
    # W = 2**1.5 at cutoff 2 in d=1; heavier vertices keep their box
    assert tower_of(WeightedVertex(0, TorusPoint((5.0,)), 3.0), t, 2) == BoxId(3, (2,))


def test_eps_rounding():
    assert eps_level(9, 0.1) == 1
    assert eps_level(0, 0.1) == 0
    assert eps_level(3, 0.5) == 2
    with pytest.raises(InvalidInputError):
        eps_level(3, 0)


def test_empty_window_fails_condition_one():
    p = line_params(4.0)
    t = build_tessellation(p)
    g = graph_from_vertices(p, np.empty((0, 1)), np.empty(0))
    r = is_active_tower(t, g, TowerId(1, (1,)))
    assert not r.cond1 and not r.active and r.failing_box is not None


def test_dense_instance_all_active():
    t, g = dense_instance()
    for cutoff in range(t.rho0):
        an = TowerAnalyzer(t, g, cutoff, eps=0.5)
        assert an.cond1_all().all()
        assert an.active_all().all()
        r = an.report(0)
        assert r.active and r.failing_box is None and r.stray_pair is None


def test_condition_three_witness():
    p = line_params(16.0)
    t = build_tessellation(p)
    # a chain of weight-1 vertices spaced 0.75 apart: one component of geometric diameter 2.25
    pos = [[4.1], [4.85], [5.6], [6.35]]
    g = graph_from_vertices(p, pos, [1.0] * 4)
    assert g.num_edges == 3
    an = TowerAnalyzer(t, g, cutoff=3, eps=0.25, c3=1.0)  # k = 1, stray diameter limit 2**0.5
    r = an.report(TowerId(3, (3,)))
    assert not r.cond3 and not r.active
    assert set(r.stray_pair) == {0, 3}
    loose = TowerAnalyzer(t, g, cutoff=3, eps=0.25, c3=4.0).report(TowerId(3, (3,)))
    assert loose.cond3


def test_condition_two_witness():
    p = line_params(16.0)
    t = build_tessellation(p)
    g = graph_from_vertices(p, [[4.1], [6.9]], [1.5, 1.5])
    assert g.num_edges == 0
    r = TowerAnalyzer(t, g, cutoff=3, eps=0.25).report(TowerId(3, (3,)))
    assert not r.cond2 and set(r.split_pair) == {0, 1}


def test_report_matches_bulk_and_vertex_order():
    p = ModelParams(d=2, lam=6, tau=2.5, n=256, d0_target=0.25, seed=3)
    g = sample_graph(p)
    t = build_tessellation(p)
    perm = np.random.default_rng(0).permutation(g.num_vertices)
    h = graph_from_vertices(p, g.positions[perm], g.weights[perm])
    for cutoff in (1, 2):
        a = TowerAnalyzer(t, g, cutoff, eps=0.5)
        b = TowerAnalyzer(t, h, cutoff, eps=0.5)
        c1, act = a.cond1_all(), a.active_all()
        assert np.array_equal(c1, b.cond1_all()) and np.array_equal(act, b.active_all())
        for i in range(len(c1)):
            r = a.report(i)
            assert r.cond1 == c1[i]
            if c1[i]:
                assert r.active == act[i]


def test_cutoff_zero_matches_poisson_closed_form():
    lam, d0 = 8.0, 0.25
    p = ModelParams(d=1, lam=lam, tau=2.5, n=4096, d0_target=d0, seed=11)
    g = sample_graph(p)
    t = build_tessellation(p)
    an = TowerAnalyzer(t, g, 0)
    q = 1 - math.exp(-lam * d0 * (1 - 2 ** (-0.5 * 1.5)))
    assert abs(an.column_grid().mean() - q) < 0.02
    assert abs(an.cond1_all().mean() - q**3) < 0.02


def test_activity_rate_rises_with_intensity():
    rates = {}
    for lam in (1.0, 64.0):
        graphs = [sample_graph(ModelParams(d=1, lam=lam, tau=2.5, n=128, d0_target=0.25, seed=s)) for s in range(2)]
        rates[lam] = tower_activity_rate(lambda g: build_tessellation(g.params), graphs, [1])[1]
    assert rates[64.0] > rates[1.0]
    assert rates[64.0] > 0.95


def test_tiling():
    p = ModelParams(d=2, lam=2, tau=2.5, n=1024, d0_target=0.25, seed=5)
    g = sample_graph(p)
    t = build_tessellation(p)
    for cutoff in range(t.rho0):
        el = element_tessellation(t, cutoff)
        codes = el.box_codes(g.positions, g.weights)
        lv = el.levels_of(codes)
        an = TowerAnalyzer(t, g, cutoff)
        assert np.array_equal(lv == cutoff, an.vertex_tower >= 0)
        assert np.array_equal(codes[lv == cutoff] - el.level_offset(cutoff), an.vertex_tower[lv == cutoff])
        assert np.bincount(codes, minlength=el.total).sum() == g.num_vertices


@pytest.mark.parametrize("d,r,cutoff", [(1, 4, 1), (2, 3, 1), (2, 4, 2), (3, 3, 1)])
def test_element_graph_adjacency(d, r, cutoff):
    el = element_tessellation(Tessellation(0.25 * 2**r, d, r), cutoff)
    b, g = brute_box_edges(el)
    assert set(map(tuple, el.b_edges.tolist())) == b
    assert set(map(tuple, el.gplus_edges.tolist())) == g
    assert b <= g


def test_coarse_region_all_active():
    t, g = dense_instance()
    cr = CoarseRegions(t, g, 1, eps=0.5)
    assert cr.active.all()
    r = cr.region(TowerId(1, (1,)), TowerId(1, (5,)))
    assert np.array_equal(r.w_set, closed_neighborhood(cr.el, r.canonical_path))
    r2 = compute_region_coarse(t, g, 1, 0.5, TowerId(1, (1,)), TowerId(1, (5,)))
    assert np.array_equal(r.w_set, r2.w_set)


def test_coarse_region_cutoff_zero_reduces_to_boxes():
    p = ModelParams(d=2, lam=3, tau=2.5, n=256, d0_target=0.25, seed=2)
    g = sample_graph(p)
    t = build_tessellation(p)
    cr = CoarseRegions(t, g, 0)
    assert cr.el.total == t.total
    rng = np.random.default_rng(1)
    for _ in range(20):
        u, v = (int(x) for x in rng.integers(g.num_vertices, size=2))
        a = cr.region_for_vertices(u, v)
        b = compute_region(t, cr.active, a.source, a.target)
        assert np.array_equal(a.w_set, b.w_set) and np.array_equal(a.s_set, b.s_set)
    # active towers are a subset of occupied boxes at cutoff 0
    occ = t.active_mask(g)
    assert not (cr.active & ~occ).any()


def test_geometric_diameter_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m, d = int(rng.integers(2, 30)), int(rng.integers(1, 4))
        pos = rng.random((m, d)) * 10
        diff = np.abs(pos[:, None] - pos[None])
        ref = np.minimum(diff, 10 - diff).max(axis=2).max()
        got, (i, j) = geometric_diameter(pos, 10.0)
        assert got == pytest.approx(ref)
        gap = np.abs(pos[i] - pos[j])
        assert np.minimum(gap, 10 - gap).max() == pytest.approx(ref)


def test_activity_csv():
    t, g = dense_instance()
    buf = io.StringIO()
    write_activity_csv(buf, TowerAnalyzer(t, g, 2, eps=0.5))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "level,tower_index,cond1,cond2,cond3,active"
    assert len(lines) == 1 + 4 and lines[1] == "2,1,1,1,1,1"
