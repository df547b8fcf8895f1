"""Geodesic distances on the flat torus and on conformal metrics ``u * g0``.

Continuous distances of a conformal metric are approximated by shortest
paths on a periodic grid graph whose edges are short lattice vectors (the
*stencil*). Graph distances are an exact metric on the snapped nodes, so
symmetry and the triangle inequality hold by construction; the price is a
bounded anisotropic overestimate, see :meth:`StencilSpec.anisotropy_factor`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import EmptyInput, NonPositiveField, PointSetMismatch
from .fields import ScalarField


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _wrap(self.x))
        object.__setattr__(self, "y", _wrap(self.y))

    def shifted(self, dx: float, dy: float) -> "TorusPoint":
        return TorusPoint(self.x + dx, self.y + dy)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


def _wrap(c: float) -> float:
    c = float(c) % 1.0
    # float modulo can return exactly 1.0 for tiny negative inputs
    return 0.0 if c >= 1.0 else c


def minimal_displacement(p: TorusPoint, q: TorusPoint) -> Tuple[float, float]:
    """Representative of ``q - p`` with both components in ``[-1/2, 1/2]``.

    A component equal to ``+-1/2`` is reported as ``+1/2``.
    """
    out = []
    for d in (q.x - p.x, q.y - p.y):
        d = d - math.floor(d + 0.5)  # now in [-1/2, 1/2)
        if d == -0.5:
            d = 0.5
        out.append(d)
    return out[0], out[1]


def flat_distance(p: TorusPoint, q: TorusPoint) -> float:
    """Quotient distance on R^2 / Z^2: minimum over the 9 nearest translates."""
    dx, dy = q.x - p.x, q.y - p.y
    return min(math.hypot(dx + a, dy + b) for a in (-1, 0, 1) for b in (-1, 0, 1))


@dataclass(frozen=True)
class StencilSpec:
    """Graph neighbourhood: coprime lattice vectors of Chebyshev norm <= radius."""

    radius: int = 2
    offsets: Tuple[Tuple[int, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.radius not in (1, 2, 3):
            raise ValueError(f"stencil radius must be 1, 2 or 3, got {self.radius}")
        r = self.radius
        offs = [
            (a, b)
            for a in range(-r, r + 1)
            for b in range(-r, r + 1)
            if (a, b) != (0, 0) and math.gcd(abs(a), abs(b)) == 1
        ]
        offs.sort(key=lambda o: math.atan2(o[1], o[0]))
        object.__setattr__(self, "offsets", tuple(offs))

    def anisotropy_factor(self) -> float:
        """Worst-case ratio of flat graph distance to Euclidean distance.

        Adjacent stencil directions span a unimodular cone, so a straight
        segment inside a cone of opening ``gamma`` is matched by a two-edge-type
        path of relative length at most ``sec(gamma / 2)``.
        """
        angles = sorted(math.atan2(b, a) for a, b in self.offsets)
        gaps = [b - a for a, b in zip(angles, angles[1:])]
        gaps.append(angles[0] + 2 * math.pi - angles[-1])
        return 1.0 / math.cos(max(gaps) / 2.0)


@dataclass(frozen=True)
class DistanceMatrix:
    points: Tuple[TorusPoint, ...]
    d: np.ndarray
    label: str = ""

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64, copy=True)
        d.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    def scaled(self, c: float, label: str = "") -> "DistanceMatrix":
        return DistanceMatrix(self.points, c * self.d, label or self.label)

    def to_csv(self, path) -> None:
        """Header row of ``x:y`` point coordinates, then the matrix rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"{p.x:.17g}:{p.y:.17g}" for p in self.points])
            for row in self.d:
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path, label: str = "") -> "DistanceMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        pts = [TorusPoint(*map(float, h.split(":"))) for h in rows[0]]
        d = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(pts, d, label)


def _check_positive(u: ScalarField):
    if u.min() <= 0.0:
        raise NonPositiveField(f"conformal factor must be positive, min sample is {u.min():g}")


def snap_index(p: TorusPoint, n: int) -> Tuple[int, int]:
    return int(round(p.x * n)) % n, int(round(p.y * n)) % n


def half_offsets(stencil: StencilSpec) -> List[Tuple[int, int]]:
    """One representative of each ``+-offset`` pair."""
    return [(a, b) for a, b in stencil.offsets if a > 0 or (a == 0 and b > 0)]


def edge_weights(u: ScalarField, stencil: StencilSpec) -> List[np.ndarray]:
    """Edge weights per half offset, ``W[o][j, k]`` for the edge ``(j, k) -> (j, k) + o``.

    Weight = |offset| * h * Simpson mean of sqrt(u) over the edge, with the
    midpoint value bilinearly interpolated from sqrt(u) at grid nodes.
    """
    _check_positive(u)
    h = u.grid.h
    s = np.sqrt(u.values)
    out = []
    for a, b in half_offsets(stencil):
        end = np.roll(s, (-a, -b), axis=(0, 1))
        # midpoint sits at (a/2, b/2) grid units; odd components land between nodes
        ax, bx = math.floor(a / 2), math.floor(b / 2)
        fx, fy = a / 2 - ax, b / 2 - bx

        def node(da, db):
            return np.roll(s, (-(ax + da), -(bx + db)), axis=(0, 1))

        mid = (1 - fx) * (1 - fy) * node(0, 0)
        if fx:
            mid = mid + fx * (1 - fy) * node(1, 0)
        if fy:
            mid = mid + (1 - fx) * fy * node(0, 1)
        if fx and fy:
            mid = mid + fx * fy * node(1, 1)
        mean = (s + 4.0 * mid + end) / 6.0
        out.append(math.hypot(a, b) * h * mean)
    return out


def grid_graph(u: ScalarField, stencil: StencilSpec) -> csr_matrix:
    """Sparse adjacency of the periodic stencil graph, one entry per undirected edge."""
    n = u.n
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    for (a, b), w in zip(half_offsets(stencil), edge_weights(u, stencil)):
        rows.append(idx.ravel())
        cols.append(np.roll(idx, (-a, -b), axis=(0, 1)).ravel())
        vals.append(w.ravel())
    return csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    )


def conformal_distance_matrix(
    u: ScalarField,
    points: Sequence[TorusPoint],
    stencil: StencilSpec = StencilSpec(2),
    label: str = "",
) -> DistanceMatrix:
    """All-pairs graph distances among ``points`` under the metric ``u * g0``.

    Points are snapped to their nearest grid node and one Dijkstra search
    is run per source.
    """
    points = list(points)
    if not points:
        raise EmptyInput("point list is empty")
    _check_positive(u)
    n = u.n
    graph = grid_graph(u, stencil)
    nodes = [j * n + k for j, k in (snap_index(p, n) for p in points)]
    uniq = sorted(set(nodes))
    dist = dijkstra(graph, directed=False, indices=uniq)
    pos = {node: r for r, node in enumerate(uniq)}
    d = dist[[pos[a] for a in nodes]][:, nodes]
    # searches from a and from b sum the same path in opposite order
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(points, d, label)


def uniform_gap(A: DistanceMatrix, B: DistanceMatrix) -> Tuple[float, float, float]:
    """``(max |A - B|, min (A - B), max (A - B))`` over all pairs."""
    if A.points != B.points:
        raise PointSetMismatch("distance matrices are over different point sets")
    diff = A.d - B.d
    return float(np.abs(diff).max()), float(diff.min()), float(diff.max())


def _radical_inverse(k: int, base: int) -> float:
    f, r = 1.0, 0.0
    while k > 0:
        f /= base
        r += f * (k % base)
        k //= base
    return r


def halton_points(count: int) -> List[TorusPoint]:
    return [TorusPoint(_radical_inverse(k, 2), _radical_inverse(k, 3)) for k in range(1, count + 1)]


def lattice_points(i: int) -> List[TorusPoint]:
    return [TorusPoint(a / i, b / i) for a in range(i) for b in range(i)]


def sample_points(kind: str, count: int = 0, seed: int = 0, points=None) -> List[TorusPoint]:
    """Deterministic sample sets.

    ``kind`` is ``"halton"`` (bases 2, 3, starting at index 1), ``"lattice"``
    (``count`` is the lattice order ``i``; returns the ``i^2`` points
    ``(a/i, b/i)``) or ``"explicit"`` (``points`` as given). ``seed`` is
    accepted for interface symmetry; every kind is seed independent.
    """
    if kind == "halton":
        if count < 2:
            raise EmptyInput(f"need at least 2 sample points, got {count}")
        return halton_points(count)
    if kind == "lattice":
        if count < 1:
            raise EmptyInput(f"lattice order must be >= 1, got {count}")
        return lattice_points(count)
    if kind == "explicit":
        pts = [p if isinstance(p, TorusPoint) else TorusPoint(*p) for p in (points or [])]
        if len(pts) < 2:
            raise EmptyInput(f"need at least 2 sample points, got {len(pts)}")
        return pts
    raise ValueError(f"unknown sample kind {kind!r}")
