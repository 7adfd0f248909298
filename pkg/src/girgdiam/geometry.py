"""Torus geometry, model parameters and the threshold connection rule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

DEFAULT_D0_TARGET = 0.25


def torus_side(n: float, d: int) -> float:
    """Side length n**(1/d), snapped to the exact integer root when there is one."""
    side = float(n) ** (1.0 / d)
    r = round(side)
    if r > 0 and r**d == n:
        return float(r)
    return side


@dataclass(frozen=True)
class ModelParams:
    d: int
    lam: float
    tau: float
    n: float
    d0_target: float = DEFAULT_D0_TARGET
    edge_prob: float = 1.0
    seed: int = 0
    side: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidInputError(f"d must be a positive integer, got {self.d!r}")
        if not self.tau > 2:
            raise InvalidInputError(f"tau must exceed 2, got {self.tau!r}")
        if not self.lam > 0:
            raise InvalidInputError(f"lambda must be positive, got {self.lam!r}")
        if not self.n >= 1:
            raise InvalidInputError(f"n must be at least 1, got {self.n!r}")
        if not 0 < self.d0_target <= 0.5:
            raise InvalidInputError(f"d0_target must lie in (0, 1/2], got {self.d0_target!r}")
        if not 0 < self.edge_prob <= 1:
            raise InvalidInputError(f"edge_prob must lie in (0, 1], got {self.edge_prob!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "side", torus_side(self.n, self.d))

    @property
    def expected_vertices(self) -> float:
        return self.lam * self.n


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def d(self) -> int:
        return len(self.coords)

    def check(self, side: float) -> None:
        for c in self.coords:
            if not 0 <= c < side:
                raise InvalidInputError(f"coordinate {c} outside [0, {side})")


@dataclass(frozen=True)
class WeightedVertex:
    id: int
    pos: TorusPoint
    weight: float

    def __post_init__(self):
        if not self.weight >= 1:
            raise InvalidInputError(f"vertex weight must be >= 1, got {self.weight}")


def _coords(p) -> Sequence[float]:
    if isinstance(p, TorusPoint):
        return p.coords
    if isinstance(p, WeightedVertex):
        return p.pos.coords
    return tuple(p)


def torus_distance(a, b, side: float) -> float:
    """Max-norm distance between two points on the torus [0, side)^d."""
    ca, cb = _coords(a), _coords(b)
    if len(ca) != len(cb):
        raise InvalidInputError(f"dimension mismatch: {len(ca)} vs {len(cb)}")
    best = 0.0
    for x, y in zip(ca, cb):
        g = abs(x - y)
        g = min(g, side - g)
        if g > best:
            best = g
    return best


def volume_between(u: WeightedVertex, v: WeightedVertex, params: ModelParams) -> float:
    return torus_distance(u.pos, v.pos, params.side) ** params.d


def threshold_connects(u: WeightedVertex, v: WeightedVertex, params: ModelParams) -> bool:
    return u.weight * v.weight >= volume_between(u, v, params)


# Vectorised forms. The sampler's naive and grid constructions both go through
# `connects_pairs`, so their float comparisons are bit-identical.

def torus_gap(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    """Per-pair max-norm torus distance for row-aligned (m, d) arrays."""
    g = np.abs(a - b)
    g = np.minimum(g, side - g)
    return g.max(axis=-1)


def connects_pairs(pos_a, w_a, pos_b, w_b, side: float, d: int) -> np.ndarray:
    dist = torus_gap(pos_a, pos_b, side)
    return w_a * w_b >= dist**d
