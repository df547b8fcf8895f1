"""End-to-end supersizing experiment over a list of lattice orders.

For each order ``i``: build the skeleton, calibrate the tube, build
``u0``, measure distances at ``t = 0``, run the flow while recording
diagnostics (and distances) at the sample times, then fit ``c0`` and
``beta`` and evaluate every inequality check. Outputs are deterministic
functions of the configuration.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import config as config_mod
from .config import ExperimentConfig
from .diagnostics import (
    SQRT2,
    DiagnosticsRecord,
    convergence_to_double,
    fit_beta,
    fit_c0,
    record,
)
from .errors import IoError, ResolutionTooCoarse
from .fields import GridSpec, ScalarField, integrate
from .flow import FlowTrace, default_sample_times, evolve, init_state
from .metric import (
    DistanceMatrix,
    StencilSpec,
    conformal_distance_matrix,
    lattice_points,
    sample_points,
    uniform_gap,
)
from .skeleton import build_initial_factor, build_skeleton, calibrate_width, distance_to_skeleton
from .snapshot import write_snapshot

log = logging.getLogger(__name__)

AREA_DRIFT_TOL = 1e-6
MAX_PRINCIPLE_TOL = 1e-8
L1_TOL = 1e-6
CURVATURE_SLACK = 1.05
SUPERSIZE_SUP_TOL = 0.1
SUPERSIZE_DIST_TOL = 0.05

CSV_COLUMNS = (
    "i", "t", "area", "l1_gap", "sup_gap", "supK", "infK", "t_supK", "grad_decay",
    "hess_decay", "dist_sup_gap_d0", "dist_sup_gap_sqrt2_d0", "c0_running", "beta_running",
)


def fmt(x) -> str:
    return "nan" if x is None else f"{x:.17g}"


@dataclass(frozen=True)
class Check:
    """One inequality ``lhs <relation> rhs`` with its measured sides."""

    name: str
    lhs: float
    relation: str
    rhs: float
    i: Optional[int] = None
    note: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs if self.relation == "<=" else self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return bool(self.slack >= 0)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "i": self.i,
            "lhs": self.lhs,
            "relation": self.relation,
            "rhs": self.rhs,
            "slack": self.slack,
            "passed": self.passed,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        return cls(d["name"], d["lhs"], d["relation"], d["rhs"], d.get("i"), d.get("note", ""))


def graph_eps(stencil: StencilSpec) -> float:
    """Relative anisotropy budget of the stencil, rounded up to 1e-3 (0.028 for radius 2)."""
    return math.ceil((stencil.anisotropy_factor() - 1.0) * 1000.0) / 1000.0


def submatrix(D: DistanceMatrix, idx: Sequence[int], label: str = "") -> DistanceMatrix:
    idx = list(idx)
    return DistanceMatrix([D.points[k] for k in idx], D.d[np.ix_(idx, idx)], label or D.label)


@dataclass
class InitialData:
    i: int
    grid: GridSpec
    skeleton: object
    spec: object
    u0: ScalarField


def initial_data(i: int, n: int, pair_policy: str = "all_pairs", deficit: Optional[float] = None) -> InitialData:
    """Skeleton, calibrated tube and ``u0`` for order ``i`` on an ``n``-grid."""
    grid = GridSpec(n)
    skel = build_skeleton(i, pair_policy)
    dist = distance_to_skeleton(grid, skel)
    spec = calibrate_width(grid, i, skel, deficit=deficit, dist=dist)
    u0 = build_initial_factor(grid, spec, skel, allow_unaligned=n % i != 0, dist=dist)
    return InitialData(i, grid, skel, spec, u0)


def chain_checks(
    i: int, h: float, eps: float, d_init: DistanceMatrix, d0: DistanceMatrix, lattice: Optional[tuple] = None
) -> List[Check]:
    """Two-sided distance chain at ``t = 0`` on sample pairs and lattice pairs."""
    iu = np.triu_indices(len(d0), k=1)
    a, b = d_init.d[iu], d0.d[iu]
    upper = b + 4.0 / i + eps * b + 4.0 * h
    k = int(np.argmax(a - upper))
    checks = [
        Check("chain_lower", float((a - b).min()), ">=", -1e-9, i, "min over pairs of d_u0 - d0_graph"),
        Check("chain_upper", float(a[k]), "<=", float(upper[k]), i,
              "worst pair: d_u0 <= d0_graph + 4/i + eps*d0_graph + 4h"),
    ]
    if lattice is not None:
        li, l0 = lattice
        ju = np.triu_indices(len(l0), k=1)
        if ju[0].size:
            dev = np.abs(li.d[ju] - l0.d[ju]) - (eps * l0.d[ju] + 4.0 * h)
            k = int(np.argmax(dev))
            checks.append(Check(
                "chain_lattice", float(abs(li.d[ju][k] - l0.d[ju][k])), "<=",
                float(eps * l0.d[ju][k] + 4.0 * h), i, "worst lattice pair |d_u0 - d0_graph|",
            ))
    return checks


@dataclass
class RunResult:
    i: int
    n: int
    width: float
    transition: float
    achieved_area: float
    segments: int
    lam: float
    steps: int
    rejections: int
    u_min_seen: float
    u_max_seen: float
    area_drift: float
    c0: float
    c0_t: Optional[float]
    beta: float
    beta_t: Optional[float]
    beta_residual: float
    beta_doubled: Optional[float]
    diam_sqrt2_d0: float
    gap_t0: dict
    gap_tstar: dict
    records: List[DiagnosticsRecord]
    c0_running: List[Optional[float]]
    beta_running: List[Optional[float]]
    checks: List[Check]
    matrices: Dict[str, DistanceMatrix] = field(default_factory=dict, repr=False)
    skeleton: object = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "i": self.i,
            "n": self.n,
            "width": self.width,
            "transition": self.transition,
            "achieved_area": self.achieved_area,
            "segments": self.segments,
            "lambda": self.lam,
            "steps": self.steps,
            "rejections": self.rejections,
            "u_min_seen": self.u_min_seen,
            "u_max_seen": self.u_max_seen,
            "area_drift": self.area_drift,
            "c0": self.c0,
            "c0_t": self.c0_t,
            "beta": self.beta,
            "beta_t": self.beta_t,
            "beta_residual": self.beta_residual,
            "beta_doubled": self.beta_doubled,
            "diam_sqrt2_d0": self.diam_sqrt2_d0,
            "distance_gap_t0": self.gap_t0,
            "distance_gap_tstar": self.gap_tstar,
            "records": [r.as_dict() for r in self.records],
        }


def _sample_set(cfg: ExperimentConfig):
    """Base points and an extended set whose prefix is the base set."""
    if cfg.points_kind == "halton":
        ext = sample_points("halton", 2 * cfg.points_count, cfg.seed)
        return ext[: cfg.points_count], ext
    if cfg.points_kind == "lattice":
        pts = sample_points("lattice", cfg.points_count, cfg.seed)
    else:
        pts = sample_points("explicit", points=cfg.points)
    return pts, pts


def run_single(cfg: ExperimentConfig, i: int, out_dir: Optional[Path] = None) -> RunResult:
    n = cfg.n_for(i)
    data = initial_data(i, n, cfg.pair_policy, cfg.deficit(i))
    grid, u0 = data.grid, data.u0
    h = grid.h
    stencil = StencilSpec(cfg.stencil_radius)
    eps = graph_eps(stencil)

    base, ext = _sample_set(cfg)
    lat = lattice_points(i)
    union = list(ext) + lat
    nb, ne = len(base), len(ext)
    ib, ie, il = range(nb), range(ne), range(ne, ne + len(lat))

    def dists(u):
        return conformal_distance_matrix(u, union, stencil)

    D0 = dists(ScalarField.constant(grid, 1.0))
    Dinit = dists(u0)
    d0_b, init_b = submatrix(D0, ib, "d0_graph"), submatrix(Dinit, ib, "d_u0")
    checks = [Check("initial_area", integrate(u0), ">=", 2.0 - 1.0 / i, i, "Area(u0) >= 2 - 1/i")]
    checks += chain_checks(i, h, eps, init_b, d0_b, (submatrix(Dinit, il), submatrix(D0, il)))

    snap_dir = None
    if cfg.emit_snapshots and out_dir is not None:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)

    current: Dict[float, DistanceMatrix] = {}

    def recorder(s):
        D = Dinit if s.t == 0 else dists(s.u)
        current[s.t] = D
        if snap_dir is not None:
            write_snapshot(s.u, s.t, snap_dir / f"u_i{i}_t{s.t:.6g}.rt2f")
        return record(s, {"current": submatrix(D, ib), "d0": d0_b, "initial": init_b})

    times = [0.0] + default_sample_times(cfg.t_end, cfg.t_min, extra=[cfg.t_star])
    state = init_state(u0)
    _, trace = evolve(state, cfg.t_end, cfg.scheme_config(), times, recorder)

    area0 = trace.records[0].area
    drift = max(abs(r.area - area0) / area0 for r in trace.records)
    lo0, hi0 = u0.min(), u0.max()
    decay = [r for r in trace.records if r.t >= cfg.t_min * (1 - 1e-12)]
    c0fit = fit_c0(FlowTrace(records=decay))
    c0 = c0fit.constant

    def beta_for(idx):
        series = [(t, submatrix(D, idx)) for t, D in sorted(current.items())]
        return fit_beta(series, submatrix(Dinit, idx), c0) if c0 > 0 else None

    bfit = beta_for(ib)
    bdbl = beta_for(ie) if ne > nb else None

    c0_run, beta_run, cmax = [], [], None
    for r in trace.records:
        if r.t_supK is not None and r.t >= cfg.t_min * (1 - 1e-12):
            cmax = r.t_supK if cmax is None else max(cmax, r.t_supK)
        c0_run.append(cmax)
        if cmax and r.t > 0:
            series = [(t, submatrix(D, ib)) for t, D in current.items() if 0 < t <= r.t]
            beta_run.append(fit_beta(series, init_b, cmax).constant)
        else:
            beta_run.append(None)

    checks += [
        Check("area_drift", drift, "<=", AREA_DRIFT_TOL, i, "max relative |Area(t) - Area(0)|"),
        Check("max_principle_upper", trace.u_max_seen, "<=", hi0 + MAX_PRINCIPLE_TOL, i, "max u over accepted steps"),
        Check("max_principle_lower", trace.u_min_seen, ">=", lo0 - MAX_PRINCIPLE_TOL, i, "min u over accepted steps"),
        Check("l1_gap", max(r.l1_gap for r in trace.records), "<=", 1.0 / i + L1_TOL, i, "max_t ||u(t) - 2||_L1"),
    ]
    worst = min(decay, key=lambda r: r.infK + CURVATURE_SLACK / (2 * r.t))
    checks.append(Check("curvature_lower", worst.infK, ">=", -CURVATURE_SLACK / (2 * worst.t), i,
                        f"worst sample t={worst.t:.6g}: infK >= -1.05/(2t)"))
    checks.append(Check("c0_finite", c0, "<=", 1e300, i, "c0 = max_t t*sup|K|"))
    if bfit is not None:
        checks.append(Check("beta_inequality", bfit.residual, "<=", 0.0, i,
                            "max_(pair,t) d_u0 - d_t - beta*sqrt(c0 t)"))

    t_star_D = next(D for t, D in current.items() if math.isclose(t, cfg.t_star, rel_tol=1e-12))
    cur_star = submatrix(t_star_D, ib, "d_tstar")
    ref2 = d0_b.scaled(SQRT2, "sqrt2_d0_graph")
    g0 = uniform_gap(init_b, d0_b)
    gs = uniform_gap(cur_star, ref2)
    return RunResult(
        i=i,
        n=n,
        width=data.spec.width,
        transition=data.spec.transition,
        achieved_area=data.spec.achieved_area,
        segments=len(data.skeleton.segments),
        lam=state.lam,
        steps=trace.steps,
        rejections=trace.rejections,
        u_min_seen=trace.u_min_seen,
        u_max_seen=trace.u_max_seen,
        area_drift=drift,
        c0=c0,
        c0_t=c0fit.argmax_t,
        beta=bfit.constant if bfit else 0.0,
        beta_t=bfit.argmax_t if bfit else None,
        beta_residual=bfit.residual if bfit else 0.0,
        beta_doubled=bdbl.constant if bdbl else None,
        diam_sqrt2_d0=float(ref2.d.max()),
        gap_t0={"sup_gap": g0[0], "signed_min": g0[1], "signed_max": g0[2]},
        gap_tstar={"sup_gap": gs[0], "signed_min": gs[1], "signed_max": gs[2]},
        records=list(trace.records),
        c0_running=c0_run,
        beta_running=beta_run,
        checks=checks,
        matrices={"d0_graph": d0_b, "d_u0": init_b, "d_tstar": cur_star},
        skeleton=data.skeleton,
    )


def _run_single_annotated(args):
    cfg, i, out_dir = args
    try:
        return run_single(cfg, i, out_dir)
    except Exception as exc:
        exc.args = (f"i={i}: {exc}",) + exc.args[1:]
        raise


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    runs: Dict[int, RunResult]
    convergence: list
    checks: List[Check]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "config": config_mod.to_dict(self.config),
            "runs": {str(i): r.summary() for i, r in sorted(self.runs.items())},
            "convergence": [row.__dict__ for row in self.convergence],
            "checks": [c.as_dict() for c in self.checks],
            "all_passed": self.all_passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def global_checks(cfg: ExperimentConfig, runs: Dict[int, RunResult], rows) -> List[Check]:
    checks = []
    eps = graph_eps(StencilSpec(cfg.stencil_radius))
    for a, b in zip(rows, rows[1:]):
        checks.append(Check("supersize_sup_nonincreasing", b.sup_gap, "<=", a.sup_gap, b.i,
                            f"sup|u_i(t*) - 2| at i={b.i} vs i={a.i}"))
        checks.append(Check("l1_nonincreasing", b.l1_gap, "<=", a.l1_gap + 1e-9, b.i,
                            f"||u_i(t*) - 2||_L1 at i={b.i} vs i={a.i}"))
    for row in rows:
        if row.i >= 3:
            r = runs[row.i]
            checks.append(Check("supersize_sup", row.sup_gap, "<=", SUPERSIZE_SUP_TOL, row.i, "sup|u_i(t*) - 2|"))
            checks.append(Check("supersize_distance", r.gap_tstar["sup_gap"], "<=",
                                SUPERSIZE_DIST_TOL + eps * r.diam_sqrt2_d0, row.i,
                                "sup |d_t* - sqrt2*d0_graph| <= 0.05 + eps*diam"))
    return checks


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Run every order in ``cfg.i_list``; writes snapshots if configured.

    Every ``(i, n)`` pair is calibrated before any time stepping starts, so
    an unresolvable pair raises :class:`ResolutionTooCoarse` up front.
    """
    for i in cfg.i_list:
        grid = GridSpec(cfg.n_for(i))
        try:
            calibrate_width(grid, i, build_skeleton(i, cfg.pair_policy), deficit=cfg.deficit(i))
        except ResolutionTooCoarse as exc:
            raise ResolutionTooCoarse(f"i={i}: {exc}") from exc
    out = Path(out_dir or cfg.output_dir) if (out_dir or cfg.emit_snapshots) else None
    jobs = [(cfg, i, out) for i in cfg.i_list]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_single_annotated, jobs))
    else:
        results = [_run_single_annotated(j) for j in jobs]
    runs = {r.i: r for r in results}
    traces = {i: FlowTrace(records=r.records) for i, r in runs.items()}
    rows = convergence_to_double(traces, cfg.t_star)
    checks = [c for i in sorted(runs) for c in runs[i].checks] + global_checks(cfg, runs, rows)
    return ExperimentReport(cfg, runs, rows, checks)


def diagnostics_rows(report: ExperimentReport):
    for i, run in sorted(report.runs.items()):
        for r, c0r, br in zip(run.records, run.c0_running, run.beta_running):
            yield [
                str(i), fmt(r.t), fmt(r.area), fmt(r.l1_gap), fmt(r.sup_gap), fmt(r.supK), fmt(r.infK),
                fmt(r.t_supK), fmt(r.grad_decay), fmt(r.hess_decay), fmt(r.dist_sup_gap_to_d0),
                fmt(r.dist_sup_gap_to_sqrt2_d0), fmt(c0r), fmt(br),
            ]


def write_report(report: ExperimentReport, out_dir) -> Path:
    """Write report.json, diagnostics.csv, skeleton and distance CSVs."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        with open(out / "diagnostics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerows(diagnostics_rows(report))
        for i, run in sorted(report.runs.items()):
            run.skeleton.to_csv(out / f"skeleton_i{i}.csv")
            for name, D in sorted(run.matrices.items()):
                D.to_csv(out / f"distances_i{i}_{name}.csv")
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc}") from exc
    return out / "report.json"


def load_checks(path) -> List[Check]:
    data = json.loads(Path(path).read_text())
    return [Check.from_dict(c) for c in data["checks"]]
