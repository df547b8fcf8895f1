"""Quantities measured along a flow: curvature, area, decay rates, gaps.

The limit metric of the supersizing construction is ``2 g0``; gaps are
reported against ``u = 2`` and against ``sqrt(2)`` times flat distances.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientData, PointSetMismatch
from .fields import ScalarField, gradient, hessian, integrate, laplacian, norms
from .flow import FlowState, FlowTrace
from .metric import DistanceMatrix, uniform_gap

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    area: float
    supK: float
    infK: float
    t_supK: Optional[float]
    l1_gap: float
    sup_gap: float
    u_min: float
    u_max: float
    grad_decay: Optional[float] = None
    hess_decay: Optional[float] = None
    dist_sup_gap_to_d0: Optional[float] = None
    dist_sup_gap_to_sqrt2_d0: Optional[float] = None
    dist_min_signed_vs_initial: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FitResult:
    constant: float
    residual: float
    argmax_t: Optional[float] = None


def gauss_curvature(v: ScalarField) -> ScalarField:
    """``K = -exp(-2v) Lap(v)`` with the spectral Laplacian."""
    return ScalarField(v.grid, -np.exp(-2.0 * v.values) * laplacian(v, "spectral").values)


def gauss_bonnet_defect(v: ScalarField) -> float:
    """``integral K dV`` = ``-integral Lap(v) dx dy``; zero on a torus."""
    K = gauss_curvature(v)
    return integrate(ScalarField(v.grid, K.values * np.exp(2.0 * v.values)))


def record(s: FlowState, dists: Optional[Mapping[str, DistanceMatrix]] = None) -> DiagnosticsRecord:
    """Measure one state.

    ``dists`` may hold ``"current"`` (distances under ``u(t)``), ``"d0"``
    (flat graph distances on the same points) and ``"initial"`` (distances
    under ``u(0)``). Decay products are omitted at ``t = 0``.
    """
    v = s.v
    u = s.u
    K = gauss_curvature(v).values
    two = ScalarField.constant(v.grid, 2.0)
    l1, sup = norms(u, two)
    supK, infK = float(K.max()), float(K.min())
    kwargs = {}
    if s.t > 0:
        vx, vy = gradient(v)
        vxx, vxy, vyy = hessian(v)
        grad = float(np.sqrt(vx.values**2 + vy.values**2).max())
        hess = max(float(np.abs(c.values).max()) for c in (vxx, vxy, vyy))
        kwargs.update(
            t_supK=s.t * float(np.abs(K).max()),
            grad_decay=math.sqrt(s.t) * grad,
            hess_decay=s.t * hess,
        )
    else:
        kwargs.update(t_supK=None)
    if dists:
        cur = dists.get("current")
        d0 = dists.get("d0")
        init = dists.get("initial")
        if cur is not None and d0 is not None:
            kwargs["dist_sup_gap_to_d0"] = uniform_gap(cur, d0)[0]
            kwargs["dist_sup_gap_to_sqrt2_d0"] = uniform_gap(cur, d0.scaled(SQRT2))[0]
        if cur is not None and init is not None:
            kwargs["dist_min_signed_vs_initial"] = uniform_gap(cur, init)[1]
    return DiagnosticsRecord(
        t=s.t,
        area=integrate(u),
        supK=supK,
        infK=infK,
        l1_gap=l1,
        sup_gap=sup,
        u_min=u.min(),
        u_max=u.max(),
        **kwargs,
    )


def fit_c0(trace: FlowTrace, t_min: float = 0.0) -> FitResult:
    """Smallest ``c0`` with ``|K| <= c0 / t`` at every sample ``t > t_min``."""
    pts = [(r.t, r.t_supK) for r in trace.records if r.t > t_min and r.t_supK is not None]
    if len(pts) < 3:
        raise InsufficientData(f"need >= 3 samples with t > 0 to fit c0, got {len(pts)}")
    t_best, c0 = max(pts, key=lambda p: p[1])
    return FitResult(c0, max(v - c0 for _, v in pts), t_best)


def fit_beta(
    traces: Sequence[Tuple[float, DistanceMatrix]], initial: DistanceMatrix, c0: float
) -> FitResult:
    """Smallest ``beta >= 0`` with ``d_t >= d_init - beta sqrt(c0 t)`` on all samples."""
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0}")
    iu = np.triu_indices(len(initial), k=1)
    drops = []
    for t, d in traces:
        if d.points != initial.points:
            raise PointSetMismatch(f"distance matrix at t={t} uses a different point set")
        if t > 0 and iu[0].size:
            drops.append((t, float((initial.d - d.d)[iu].max())))
    beta, t_best = 0.0, None
    for t, drop in drops:
        if drop / math.sqrt(c0 * t) > beta:
            beta, t_best = drop / math.sqrt(c0 * t), t
    residual = max((drop - beta * math.sqrt(c0 * t) for t, drop in drops), default=0.0)
    return FitResult(beta, residual, t_best)


@dataclass(frozen=True)
class ConvergenceRow:
    i: int
    t: float
    sup_gap: float
    l1_gap: float
    dist_sup_gap: Optional[float]


def convergence_to_double(traces: Mapping[int, FlowTrace], t_star: float) -> List[ConvergenceRow]:
    """Per-order gaps between ``u_i(t_star)`` and the doubled flat metric."""
    rows = []
    for i in sorted(traces):
        rec = next((r for r in traces[i].records if math.isclose(r.t, t_star, rel_tol=1e-12)), None)
        if rec is None:
            raise InsufficientData(f"trace for i={i} has no sample at t={t_star}")
        rows.append(ConvergenceRow(i, rec.t, rec.sup_gap, rec.l1_gap, rec.dist_sup_gap_to_sqrt2_d0))
    return rows


def l1_nonincreasing(rows: Sequence[ConvergenceRow], tol: float = 1e-9) -> bool:
    return all(b.l1_gap <= a.l1_gap + tol for a, b in zip(rows, rows[1:]))


def running_max(values: Sequence[Optional[float]]) -> List[Optional[float]]:
    out, m = [], None
    for v in values:
        if v is not None:
            m = v if m is None else max(m, v)
        out.append(m)
    return out


def scaled_gap_summary(records: Sequence[DiagnosticsRecord]) -> Dict[str, float]:
    """Extremes of the recorded decay products over ``t > 0``."""
    pos = [r for r in records if r.t > 0]
    return {
        "max_t_supK": max(r.t_supK for r in pos),
        "max_grad_decay": max(r.grad_decay for r in pos),
        "max_hess_decay": max(r.hess_decay for r in pos),
        "min_t_infK": min(r.t * r.infK for r in pos),
    }
