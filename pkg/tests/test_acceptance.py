"""Acceptance gate: one test and one PASS/FAIL line per criterion."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES

from torusflow.diagnostics import fit_c0, gauss_curvature
from torusflow.experiment import chain_checks, graph_eps, initial_data, submatrix
from torusflow.fields import GridSpec, ScalarField, fourier_amplitude, integrate, norms
from torusflow.flow import SchemeConfig, default_sample_times, evolve, init_state
from torusflow.metric import StencilSpec, conformal_distance_matrix, halton_points, lattice_points

TESTS = Path(__file__).parent


def verdict(k, ok, detail):
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def checks_by_name(report, i):
    return {c.name: c for c in report.runs[i].checks}


def test_criterion_01_stationary_flat_flow():
    worst_u, worst_k = 0.0, 0.0
    for c in (1.0, 2.0):
        s0 = init_state(ScalarField.constant(GridSpec(64), c))
        s, _ = evolve(s0, 1.0, SchemeConfig("imex"), [1.0], lambda s: None)
        worst_u = max(worst_u, float(np.abs(s.u.values - c).max()))
        worst_k = max(worst_k, float(np.abs(gauss_curvature(s.v).values).max()))
    ok = worst_u <= 1e-10 and worst_k <= 1e-10
    verdict(1, ok, f"sup|u(1) - c| = {worst_u:.3g} <= 1e-10, sup|K| = {worst_k:.3g} <= 1e-10 (c in {{1, 2}}, n=64)")


def test_criterion_02_linearized_decay():
    n, t_end = 128, 0.05
    g = GridSpec(n)
    target = 0.01 * math.exp(-2 * math.pi**2 * t_end)
    schemes = {"imex": SchemeConfig("imex", imex_dt=g.h / 16), "rk4": SchemeConfig("rk4")}
    parts, ok = [], True
    for name, cfg in schemes.items():
        ratios = []
        for eps in (0.01, 0.005, 0.0025):
            u0 = ScalarField.from_function(g, lambda x, y: 2 + eps * np.cos(2 * np.pi * x))
            s, _ = evolve(init_state(u0), t_end, cfg, [t_end], lambda s: None)
            ratios.append(fourier_amplitude(s.u, 1, 0) / eps)
        rel = abs(ratios[0] * 0.01 - target) / target
        # nonlinear corrections are O(eps^2): successive differences shrink by 4
        quad = (ratios[0] - ratios[1]) / (ratios[1] - ratios[2])
        ok = ok and rel <= 0.01 and 3.0 <= quad <= 5.0
        parts.append(f"{name}: rel err {rel:.3%} <= 1%, eps-halving ratio {quad:.3f} ~ 4")
    verdict(2, ok, f"amplitude vs {target:.5g}; " + "; ".join(parts))


def test_criterion_03_area_conservation(supersize_report):
    report, _ = supersize_report
    run = report.runs[2]
    a0 = run.records[0].area
    drift = max(abs(r.area - a0) / a0 for r in run.records)
    verdict(3, drift <= 1e-6, f"i=2 n=256 imex dt=h/4: max relative area drift {drift:.3g} <= 1e-6 "
                              f"over {len(run.records)} samples")


def test_criterion_04_maximum_principle(supersize_report):
    report, _ = supersize_report
    run = report.runs[2]
    ok = run.u_min_seen >= 1 - 1e-8 and run.u_max_seen <= 2 + 1e-8
    verdict(4, ok, f"i=2: u over {run.steps} accepted steps in [{run.u_min_seen:.12g}, {run.u_max_seen:.12g}] "
                   f"within [1 - 1e-8, 2 + 1e-8]")


def test_criterion_05_initial_area():
    parts, ok = [], True
    for i in (1, 2, 3):
        data = initial_data(i, 256)
        area = integrate(data.u0)
        l1, _ = norms(data.u0, ScalarField.constant(data.grid, 2.0))
        ok = ok and area >= 2 - 1 / i and l1 <= 1 / i
        parts.append(f"i={i}: area {area:.6f} >= {2 - 1 / i:.6f}, L1 {l1:.6f} <= {1 / i:.6f}")
    verdict(5, ok, "; ".join(parts))


def test_criterion_06_distance_chain(supersize_report):
    report, _ = supersize_report
    i2 = checks_by_name(report, 2)
    parts = [f"i=2 n=256: {c.name} {c.lhs:.6g} {c.relation} {c.rhs:.6g}"
             for c in (i2["chain_lower"], i2["chain_upper"], i2["chain_lattice"])]
    ok = all(i2[k].passed for k in ("chain_lower", "chain_upper", "chain_lattice"))

    data = initial_data(3, 512)
    pts = halton_points(64) + lattice_points(3)
    stencil = StencilSpec(2)
    D0 = conformal_distance_matrix(ScalarField.constant(data.grid, 1.0), pts, stencil)
    Di = conformal_distance_matrix(data.u0, pts, stencil)
    base, lat = range(64), range(64, 73)
    checks = chain_checks(3, data.grid.h, graph_eps(stencil), submatrix(Di, base), submatrix(D0, base),
                        (submatrix(Di, lat), submatrix(D0, lat)))
    ok = ok and all(c.passed for c in checks)
    parts += [f"i=3 n=512: {c.name} {c.lhs:.6g} {c.relation} {c.rhs:.6g}" for c in checks]
    verdict(6, ok, "; ".join(parts))


def test_criterion_07_l1_gap_in_time(supersize_report):
    report, _ = supersize_report
    parts, ok = [], True
    for i in (2, 3):
        worst = max(r.l1_gap for r in report.runs[i].records)
        ok = ok and worst <= 1 / i + 1e-6
        parts.append(f"i={i}: max_t L1 gap {worst:.9f} <= {1 / i + 1e-6:.9f}")
    verdict(7, ok, "; ".join(parts))


@pytest.fixture(scope="module")
def c0_refined():
    """c0 for i = 2 at n = 512 on the same sample times as the n = 256 run."""
    data = initial_data(2, 512)
    times = [0.0] + default_sample_times(1.0, 1e-3, extra=[0.2])
    _, trace = evolve(init_state(data.u0), 1.0, SchemeConfig("imex"), times)
    decay = [r for r in trace.records if r.t >= 1e-3 * (1 - 1e-12)]
    trace.records = decay
    return fit_c0(trace, t_min=0.0).constant


def test_criterion_08_curvature_decay(supersize_report, c0_refined):
    report, _ = supersize_report
    parts, ok = [], True
    for i in (2, 3):
        run = report.runs[i]
        decay = [r for r in run.records if 1e-3 * (1 - 1e-12) <= r.t <= 1.0]
        finite = all(r.t_supK is not None and math.isfinite(r.t_supK) for r in decay)
        lower = min(r.infK + 1.05 / (2 * r.t) for r in decay)
        ok = ok and finite and lower >= 0 and math.isfinite(run.c0)
        parts.append(f"i={i}: t*sup|K| finite on {len(decay)} samples, c0 = {run.c0:.5g} at t={run.c0_t:.3g}, "
                     f"min_t (infK + 1.05/(2t)) = {lower:.4g} >= 0")
    c0 = report.runs[2].c0
    change = abs(c0_refined - c0) / c0
    ok = ok and change <= 0.30
    parts.append(f"i=2 n-doubling: c0(256) = {c0:.5g}, c0(512) = {c0_refined:.5g}, change {change:.1%} <= 30%")
    verdict(8, ok, "; ".join(parts))


def test_criterion_09_supersizing(supersize_report):
    report, _ = supersize_report
    rows = {r.i: r for r in report.convergence}
    sup = [rows[i].sup_gap for i in (1, 2, 3)]
    monotone = all(b <= a for a, b in zip(sup, sup[1:]))
    small = sup[2] <= 0.1
    run3 = report.runs[3]
    eps = graph_eps(StencilSpec(2))
    dgap = run3.gap_tstar["sup_gap"]
    dbound = 0.05 + eps * run3.diam_sqrt2_d0
    near0 = checks_by_name(report, 3)["chain_upper"].passed and checks_by_name(report, 3)["chain_lower"].passed
    ok = monotone and small and dgap <= dbound
    verdict(9, ok, f"t*=0.2 sup|u_i - 2| for i=1,2,3 = {sup[0]:.4g}, {sup[1]:.4g}, {sup[2]:.4g} "
                   f"(nonincreasing: {monotone}; i=3 <= 0.1: {small}); "
                   f"i=3 sup|d_t* - sqrt2 d0_graph| = {dgap:.4g} <= {dbound:.4g}: {dgap <= dbound}; "
                   f"initial chain at i=3 holds: {near0}")


def test_criterion_10_semicontinuity_fit(supersize_report):
    report, _ = supersize_report
    run = report.runs[2]
    finite = math.isfinite(run.beta) and run.beta_doubled is not None and math.isfinite(run.beta_doubled)
    change = abs(run.beta_doubled - run.beta) / run.beta if run.beta > 0 else math.inf
    ok = finite and change <= 0.25 and run.beta_residual <= 0.0
    verdict(10, ok, f"i=2: beta(64 pts) = {run.beta:.5g}, beta(128 pts) = {run.beta_doubled:.5g}, "
                    f"change {change:.1%} <= 25%, max inequality residual {run.beta_residual:.3g} <= 0")


def test_criterion_11_property_suites_standalone():
    suites = ["test_fields.py", "test_metric.py", "test_skeleton.py", "test_snapshot.py"]
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *suites],
        cwd=TESTS, capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - start
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed <= 60
    verdict(11, ok, f"{', '.join(suites)}: {tail} in {elapsed:.1f}s <= 60s")
