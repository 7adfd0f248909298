"""Snake-path witnesses for the logarithmic diameter lower bound.

A cube is cut into M^d sub-cubes visited in reflected M-ary Gray order; the
polyline through their centres is the skeleton. Unit balls placed along it at
arc-length spacing 2 should each hold exactly one vertex of weight in
[2^d, 3^d], which then forms a long induced path.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .graph import Graph, bfs_distances, components
from .geometry import torus_gap

GAP_SEPARATION = 12.0
MIN_CUBE_SIDE = 4.0
BALL_SPACING = 2.0
BALL_RADIUS = 0.5  # max-norm ball of volume 1


def gray_code(M: int, d: int) -> np.ndarray:
    """Reflected M-ary Gray sequence over d digits, digit 0 changing fastest.

    Returns an (M**d, d) int array.
    """
    if M < 2 or d < 1:
        raise InvalidInputError(f"gray code needs M >= 2 and d >= 1, got M={M}, d={d}")
    seq = np.arange(M, dtype=np.int64).reshape(M, 1)
    for _ in range(1, d):
        blocks = []
        for t in range(M):
            part = seq if t % 2 == 0 else seq[::-1]
            blocks.append(np.hstack([part, np.full((len(part), 1), t, dtype=np.int64)]))
        seq = np.vstack(blocks)
    return seq


def check_gray_invariants(seq: np.ndarray, M: int) -> bool:
    seq = np.asarray(seq)
    d = seq.shape[1]
    if len(seq) != M ** d or len({tuple(r) for r in seq}) != len(seq):
        return False
    if seq.min() < 0 or seq.max() >= M:
        return False
    diff = np.abs(np.diff(seq, axis=0))
    return bool(np.all(diff.sum(axis=1) == 1) and np.all(diff.max(axis=1) == 1))


@dataclass
class GrayCurve:
    M: int
    d: int
    s: float
    origin: np.ndarray
    order: np.ndarray  # (M^d, d) cube index vectors in visiting order

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (self.order + 0.5) * self.s

    @property
    def length(self) -> float:
        return (len(self.order) - 1) * self.s

    def point_at(self, arc) -> np.ndarray:
        """Points at the given arc lengths from the start of the polyline."""
        arc = np.clip(np.asarray(arc, dtype=np.float64), 0.0, self.length)
        seg = np.minimum((arc // self.s).astype(np.int64), len(self.order) - 2)
        frac = (arc - seg * self.s) / self.s
        c = self.centers
        if len(c) == 1:
            return np.repeat(c, len(np.atleast_1d(arc)), axis=0)
        return c[seg] + frac[..., None] * (c[seg + 1] - c[seg])

    def cube_at(self, arc) -> np.ndarray:
        """Index in visiting order of the cube holding each arc position (ties go to the later cube)."""
        arc = np.clip(np.asarray(arc, dtype=np.float64), 0.0, self.length)
        return np.minimum(np.floor(arc / self.s + 0.5).astype(np.int64), len(self.order) - 1)

    def pieces(self):
        """Curve pieces cube by cube: (cube position, start point, end point).

        Every cube holds the half segments from its centre towards the
        previous and the next centre.
        """
        c = self.centers
        owner, a, b = [], [], []
        for j in range(len(c)):
            if j > 0:
                owner.append(j)
                a.append((c[j - 1] + c[j]) / 2)
                b.append(c[j])
            if j + 1 < len(c):
                owner.append(j)
                a.append(c[j])
                b.append((c[j] + c[j + 1]) / 2)
        return np.array(owner), np.array(a).reshape(-1, self.d), np.array(b).reshape(-1, self.d)


def gray_curve(region_origin, M: int, s: float, d: int) -> GrayCurve:
    if not s > 0:
        raise InvalidInputError(f"cube side must be positive, got {s}")
    origin = np.zeros(d) if region_origin is None else np.asarray(region_origin, dtype=np.float64)
    return GrayCurve(M, d, float(s), origin, gray_code(M, d))


def _pair_mask(owner: np.ndarray) -> np.ndarray:
    return np.abs(owner[:, None] - owner[None, :]) > 1


def min_nonconsecutive_gap(curve: GrayCurve) -> float:
    """Exact min max-norm distance between curve points in non-consecutive cubes.

    Each piece is axis-parallel, so per axis the coordinate difference of two
    pieces ranges over an interval independently of the other axes; the
    minimum of the max-norm is then the largest per-axis interval gap.
    """
    if len(curve.order) < 3:
        raise InvalidInputError("the gap needs at least three cubes")
    owner, a, b = curve.pieces()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    # interval of x_k - y_k is [lo_x - hi_y, hi_x - lo_y]
    dlo = lo[:, None, :] - hi[None, :, :]
    dhi = hi[:, None, :] - lo[None, :, :]
    sep = np.maximum(np.maximum(dlo, -dhi), 0.0).max(axis=2)
    return float(sep[_pair_mask(owner)].min())


def discretized_gap(curve: GrayCurve, samples: int = 33):
    """Brute-force gap over `samples` points per piece.

    Returns (sampled minimum, certified lower bound). Points are at most
    h/2 from a sample along each piece, h the sample spacing, so the true
    minimum is at least the sampled one minus h.
    """
    owner, a, b = curve.pieces()
    t = np.linspace(0.0, 1.0, samples)
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    mask = _pair_mask(owner)
    best = math.inf
    for i in range(len(owner)):
        js = np.nonzero(mask[i])[0]
        if len(js) == 0:
            continue
        diff = np.abs(pts[i][:, None, None, :] - pts[js][None, :, :, :]).max(axis=3)
        best = min(best, float(diff.min()))
    h = curve.s / 2 / (samples - 1)
    return best, best - h


# --- witness probe -------------------------------------------------------------

@dataclass
class ProbeRegion:
    """Candidate cube R (side `outer_side`) with the inner region R' centred in it."""
    center: np.ndarray
    outer_side: float


@dataclass
class WitnessReport:
    success: bool
    curve: GrayCurve | None
    balls: np.ndarray
    ball_cubes: np.ndarray
    ball_counts: np.ndarray
    path: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    component_diameter: int | None = None

    @property
    def first_violation(self) -> str:
        return self.violations[0] if self.violations else ""


def choose_gray_level(inner_side: float, d: int, separation: float = GAP_SEPARATION,
                      min_side: float = MIN_CUBE_SIDE):
    """Largest M whose Gray curve on a cube of `inner_side` keeps non-consecutive points `separation` apart."""
    best = None
    M = 2
    while inner_side / M >= min_side:
        s = inner_side / M
        if M ** d < 3 or min_nonconsecutive_gap(gray_curve(None, M, s, d)) >= separation:
            best = M
        M += 1
    if best is None:
        raise InvalidInputError(f"inner region of side {inner_side:.3g} is too small for a Gray curve")
    return best


def ball_centers(curve: GrayCurve, spacing: float = BALL_SPACING) -> np.ndarray:
    """Arc positions of the balls: one at the start, then every `spacing`."""
    return np.arange(0.0, curve.length + 1e-9, spacing)


def plant_witness_probe(region: ProbeRegion, graph, C1_prime: float) -> WitnessReport:
    """Check the snake-path event inside one candidate cube."""
    d, side = graph.d, graph.side
    if region.outer_side > side:
        raise InvalidInputError("candidate region exceeds the torus")
    inner_side = (C1_prime * math.log(graph.n)) ** (1.0 / d)
    if inner_side > region.outer_side:
        raise InvalidInputError("inner region does not fit inside the candidate cube")
    M = choose_gray_level(inner_side, d)
    curve = gray_curve(np.asarray(region.center, dtype=np.float64) - inner_side / 2, M, inner_side / M, d)
    arcs = ball_centers(curve)
    balls = np.mod(curve.point_at(arcs), side)
    cubes = curve.cube_at(arcs)

    lo, hi = 2.0 ** d, 3.0 ** d
    cand = np.nonzero((graph.weights >= lo) & (graph.weights <= hi))[0]
    counts = np.zeros(len(balls), dtype=np.int64)
    chosen = np.full(len(balls), -1, dtype=np.int64)
    violations = []
    cpos = graph.positions[cand]
    for k, c in enumerate(balls):
        inside = cand[torus_gap(cpos, c, side) <= BALL_RADIUS]
        counts[k] = len(inside)
        if len(inside) == 1:
            chosen[k] = inside[0]
        elif not violations:
            violations.append(f"ball {k} holds {len(inside)} vertices of weight in [{lo:g}, {hi:g}]")
    rep = WitnessReport(False, curve, balls, cubes, counts, violations=violations)
    if violations:
        return rep
    if len(set(chosen.tolist())) != len(chosen):
        rep.violations.append("one vertex lies in two balls")
        return rep

    g: Graph = graph
    for k in range(len(chosen) - 1):
        if not g.has_edge(int(chosen[k]), int(chosen[k + 1])):
            rep.violations.append(f"balls {k} and {k + 1} are not connected")
            return rep
    path_set = set(int(v) for v in chosen)
    vpos = {int(v): k for k, v in enumerate(chosen)}
    for k, v in enumerate(chosen):
        for w in g.neighbors(int(v)).tolist():
            if w not in path_set:
                rep.violations.append(f"external attachment: vertex {w} joins ball {k}")
                return rep
            j = vpos[w]
            if abs(int(cubes[j]) - int(cubes[k])) > 1:
                rep.violations.append(f"shortcut between balls {k} and {j} in non-consecutive cubes")
                return rep
    rep.path = [int(v) for v in chosen]
    rep.success = True
    # no outside neighbours, so the path set is a whole component
    rep.component_diameter = _small_diameter(g, np.array(rep.path))
    return rep


def candidate_regions(graph, tau: float, eps: float = 0.05):
    """Disjoint cubes of volume about n^(1/(tau-1)+2eps) tiling the torus."""
    side = graph.side
    target = graph.n ** ((1.0 / (tau - 1) + 2 * eps) / graph.d)
    per_axis = max(1, int(side // target))
    cell = side / per_axis
    regions = []
    for idx in np.ndindex(*(per_axis,) * graph.d):
        regions.append(ProbeRegion((np.array(idx[::-1]) + 0.5) * cell, cell))
    return regions


def probe_all(graph, tau: float, C1_prime: float, eps: float = 0.05) -> list:
    out = []
    for region in candidate_regions(graph, tau, eps):
        try:
            out.append(plant_witness_probe(region, graph, C1_prime))
        except InvalidInputError as e:
            out.append(WitnessReport(False, None, np.empty((0, graph.d)), np.empty(0, dtype=np.int64),
                                     np.empty(0, dtype=np.int64), violations=[str(e)]))
    return out


def write_witness_csv(fh, reports) -> None:
    fh.write("cube_index,success,first_violation,component_diameter\n")
    for i, r in enumerate(reports):
        diam = "" if r.component_diameter is None else str(r.component_diameter)
        msg = r.first_violation.replace(",", ";")
        fh.write(f"{i},{int(r.success)},{msg},{diam}\n")


# --- scanning sampled graphs -----------------------------------------------------

def scan_long_low_weight_component(graph, weight_cap: float | None = None):
    """Component of maximum diameter among those with every weight <= cap.

    Returns (component label, diameter), or None when no component
    qualifies. Labels follow `graph.components` (ordered by lowest vertex id).
    """
    cap = 3.0 ** graph.d if weight_cap is None else weight_cap
    g: Graph = graph
    lab = components(g)
    heavy = np.zeros(lab.count, dtype=bool)
    heavy[lab.labels[graph.weights > cap]] = True
    good = np.nonzero(~heavy)[0]
    if len(good) == 0:
        return None
    order = np.argsort(lab.labels, kind="stable")
    starts = np.concatenate([[0], np.cumsum(lab.sizes)])
    best = (-1, -1)
    for c in good:
        members = order[starts[c]:starts[c + 1]]
        if lab.sizes[c] - 1 <= best[1]:
            continue  # cannot beat the current best
        diam = _small_diameter(g, members)
        if diam > best[1]:
            best = (int(c), diam)
    return best


def _small_diameter(g: Graph, members: np.ndarray) -> int:
    if len(members) <= 2:
        return len(members) - 1
    return max(int(bfs_distances(g, int(v))[members].max()) for v in members)


def max_weight_check(graph, tau: float, eps: float = 0.1) -> bool:
    """Warn when the largest weight exceeds n^(1/(tau-1)+eps)."""
    if graph.num_vertices == 0:
        return True
    ok = float(graph.weights.max()) <= graph.n ** (1.0 / (tau - 1) + eps)
    if not ok:
        warnings.warn("maximum weight above n^(1/(tau-1)+eps)", RuntimeWarning, stacklevel=2)
    return ok


__all__ = [
    "gray_code", "check_gray_invariants", "GrayCurve", "gray_curve", "min_nonconsecutive_gap",
    "discretized_gap", "ProbeRegion", "WitnessReport", "choose_gray_level", "ball_centers",
    "plant_witness_probe", "candidate_regions", "probe_all", "write_witness_csv",
    "scan_long_low_weight_component", "max_weight_check",
]
