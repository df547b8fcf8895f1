"""Lattice skeletons and the initial conformal factor built around them.

For lattice order ``i`` the skeleton is the union of one minimizing flat
geodesic per pair of lattice points ``(a/i, b/i)``. The initial factor is
``1`` inside a tube of half-width ``w`` around the skeleton, ``2`` beyond
``w + r``, with a quintic smoothstep in between.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from .errors import GridAlignment, InvalidOrder, ResolutionTooCoarse
from .fields import GridSpec, ScalarField, integrate
from .metric import TorusPoint, lattice_points, minimal_displacement

log = logging.getLogger(__name__)

PAIR_POLICIES = ("all_pairs", "nearest_neighbors")


@dataclass(frozen=True)
class GeodesicSegment:
    start: TorusPoint
    disp: Tuple[float, float]

    @property
    def length(self) -> float:
        return math.hypot(*self.disp)

    @property
    def end(self) -> TorusPoint:
        return self.start.shifted(*self.disp)


@dataclass(frozen=True)
class Skeleton:
    order: int
    lattice: Tuple[TorusPoint, ...]
    segments: Tuple[GeodesicSegment, ...]
    pair_policy: str = "all_pairs"

    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["start_x", "start_y", "disp_x", "disp_y"])
            for s in self.segments:
                w.writerow([f"{v:.17g}" for v in (s.start.x, s.start.y, *s.disp)])


def build_skeleton(i: int, pair_policy: str = "all_pairs") -> Skeleton:
    """Lattice of order ``i`` and one minimizing segment per lattice pair.

    ``nearest_neighbors`` keeps only segments of length ``1/i``; it is a
    cheap qualitative variant, not the all-pairs network.
    """
    if not isinstance(i, (int, np.integer)) or i < 1:
        raise InvalidOrder(f"lattice order must be an integer >= 1, got {i!r}")
    if pair_policy not in PAIR_POLICIES:
        raise ValueError(f"unknown pair policy {pair_policy!r}")
    lattice = lattice_points(int(i))
    segs = []
    for p, q in combinations(lattice, 2):
        disp = minimal_displacement(p, q)
        seg = GeodesicSegment(p, disp)
        if pair_policy == "nearest_neighbors" and not math.isclose(seg.length, 1.0 / i):
            continue
        segs.append(seg)
    return Skeleton(int(i), tuple(lattice), tuple(segs), pair_policy)


def _segment_distance(px, py, sx, sy, dx, dy):
    """Euclidean distance from points ``(px, py)`` to segment ``s + t d``, ``t in [0, 1]``."""
    rx, ry = px - sx, py - sy
    ll = dx * dx + dy * dy
    if ll == 0.0:
        return np.hypot(rx, ry)
    t = np.clip((rx * dx + ry * dy) / ll, 0.0, 1.0)
    return np.hypot(rx - t * dx, ry - t * dy)


def distance_to_skeleton(grid: GridSpec, s: Skeleton) -> ScalarField:
    """Torus distance from every grid node to the skeleton.

    Each node is tested through its 9 nearest integer translates against
    each segment; the projection is exact, no sampling along segments.
    """
    x, y = grid.mesh()
    best = np.full(x.shape, np.inf)
    if not s.segments:
        # order 1: the skeleton is the lone lattice point
        segs = [GeodesicSegment(p, (0.0, 0.0)) for p in s.lattice]
    else:
        segs = s.segments
    for seg in segs:
        sx, sy = seg.start.x, seg.start.y
        dx, dy = seg.disp
        for a in (-1.0, 0.0, 1.0):
            for b in (-1.0, 0.0, 1.0):
                np.minimum(best, _segment_distance(x + a, y + b, sx, sy, dx, dy), out=best)
    return ScalarField(grid, best)


def smoothstep5(s):
    """Quintic smoothstep: 0 for s <= 0, 1 for s >= 1, C^2 and monotone."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


@dataclass(frozen=True)
class InitialFactorSpec:
    order: int
    width: float
    transition: float
    profile: str = "quintic"
    achieved_area: Optional[float] = None
    samples: Tuple[Tuple[float, float], ...] = field(default=(), repr=False)

    def resolvable(self, grid: GridSpec) -> bool:
        return self.width > 0 and self.transition > 0 and self.width + self.transition >= 3 * grid.h * (1 - 1e-12)


def factor_from_distance(dist: ScalarField, width: float, transition: float) -> ScalarField:
    return ScalarField(dist.grid, 1.0 + smoothstep5((dist.values - width) / transition))


def build_initial_factor(
    grid: GridSpec,
    spec: InitialFactorSpec,
    s: Skeleton,
    allow_unaligned: bool = False,
    dist: Optional[ScalarField] = None,
) -> ScalarField:
    """``u0 = 1 + smoothstep5((dist_to_skeleton - w) / r)``, valued in ``[1, 2]``.

    The grid must be divisible by the lattice order so lattice points are
    nodes; ``allow_unaligned`` relaxes this (lattice points then sit off-grid
    and distance checks must budget the snapping error).
    """
    if not spec.resolvable(grid):
        raise ResolutionTooCoarse(
            f"w + r = {spec.width + spec.transition:.3g} is below 3h = {3 * grid.h:.3g} at n={grid.n}"
        )
    if grid.n % s.order and not allow_unaligned:
        raise GridAlignment(f"grid n={grid.n} is not divisible by lattice order i={s.order}")
    if dist is None:
        dist = distance_to_skeleton(grid, s)
    return factor_from_distance(dist, spec.width, spec.transition)


def calibrate_width(
    grid: GridSpec,
    i: int,
    s: Skeleton,
    deficit: Optional[float] = None,
    iterations: int = 12,
    dist: Optional[ScalarField] = None,
) -> InitialFactorSpec:
    """Widest tube (``r = w``) whose factor still has area ``>= 2 - deficit``.

    ``deficit`` defaults to ``1/i``. Bisection runs over ``w in [3h/2, 1/4]``;
    the area is checked to be nonincreasing in ``w`` across the samples.
    """
    if deficit is None:
        deficit = 1.0 / i
    target = 2.0 - deficit
    if dist is None:
        dist = distance_to_skeleton(grid, s)

    def area(w):
        return integrate(factor_from_distance(dist, w, w))

    lo, hi = 1.5 * grid.h, 0.25
    a_lo = area(lo)
    samples = [(lo, a_lo)]
    if a_lo < target:
        raise ResolutionTooCoarse(
            f"i={i}, n={grid.n}: narrowest resolvable tube w={lo:.4g} gives area "
            f"{a_lo:.6f} < {target:.6f}; increase n"
        )
    a_hi = area(hi)
    samples.append((hi, a_hi))
    if a_hi >= target:
        lo, a_lo = hi, a_hi
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            a_mid = area(mid)
            samples.append((mid, a_mid))
            if a_mid >= target:
                lo, a_lo = mid, a_mid
            else:
                hi = mid
    ordered = sorted(samples)
    if any(b[1] > a[1] + 1e-12 for a, b in zip(ordered, ordered[1:])):
        log.warning("area is not monotone in tube width on bisection samples: %s", ordered)
    return InitialFactorSpec(i, lo, lo, achieved_area=a_lo, samples=tuple(ordered))


def area_is_monotone(spec: InitialFactorSpec, tol: float = 1e-12) -> bool:
    ordered = sorted(spec.samples)
    return all(b[1] <= a[1] + tol for a, b in zip(ordered, ordered[1:]))


def lattice_on_grid(grid: GridSpec, i: int) -> bool:
    return grid.n % i == 0


__all__ = [
    "GeodesicSegment",
    "Skeleton",
    "InitialFactorSpec",
    "build_skeleton",
    "distance_to_skeleton",
    "build_initial_factor",
    "calibrate_width",
    "smoothstep5",
    "area_is_monotone",
]
