import math

import numpy as np
import pytest

from torusflow.errors import GridAlignment, InvalidOrder, ResolutionTooCoarse
from torusflow.fields import GridSpec, integrate
from torusflow.metric import TorusPoint, flat_distance
from torusflow.skeleton import (
    InitialFactorSpec,
    area_is_monotone,
    build_initial_factor,
    build_skeleton,
    calibrate_width,
    distance_to_skeleton,
    smoothstep5,
)


def dense_oracle(x, y, s, samples=2048):
    """Torus distance from (x, y) to the skeleton by dense sampling of each segment."""
    t = np.linspace(0.0, 1.0, samples)
    best = math.inf
    segs = s.segments or [type("S", (), {"start": p, "disp": (0.0, 0.0)}) for p in s.lattice]
    q = TorusPoint(x, y)
    for seg in segs:
        for tt in t:
            p = TorusPoint(seg.start.x + tt * seg.disp[0], seg.start.y + tt * seg.disp[1])
            best = min(best, flat_distance(p, q))
    return best


def test_skeleton_counts():
    assert len(build_skeleton(1).segments) == 0
    assert len(build_skeleton(2).segments) == 6
    assert len(build_skeleton(3).segments) == 36
    assert len(build_skeleton(2, "nearest_neighbors").segments) == 4
    assert len(build_skeleton(3, "nearest_neighbors").segments) == 18
    with pytest.raises(InvalidOrder):
        build_skeleton(0)
    with pytest.raises(InvalidOrder):
        build_skeleton(2.0)


def test_order_two_lengths_and_tie_break():
    s = build_skeleton(2)
    lengths = sorted(seg.length for seg in s.segments)
    assert lengths == pytest.approx([0.5] * 4 + [math.sqrt(2) / 2] * 2)
    for seg in s.segments:
        assert all(c in (0.0, 0.5) for c in seg.disp)
    assert s.total_length() == pytest.approx(2 + math.sqrt(2))


def test_order_three_lengths_match_brute_force():
    s = build_skeleton(3)
    for seg in s.segments:
        brute = min(
            math.hypot(seg.end.x - seg.start.x + a, seg.end.y - seg.start.y + b)
            for a in (-1, 0, 1) for b in (-1, 0, 1)
        )
        assert seg.length == pytest.approx(brute, abs=1e-14)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_distance_to_skeleton_matches_dense_sampling(i):
    g = GridSpec(16)
    s = build_skeleton(i)
    d = distance_to_skeleton(g, s)
    rng = np.random.default_rng(i)
    for j, k in rng.integers(0, 16, size=(6, 2)):
        # sampling overestimates by at most half a sample spacing
        oracle = dense_oracle(j / 16, k / 16, s)
        assert d.values[j, k] <= oracle + 1e-12
        assert d.values[j, k] >= oracle - 1e-3


def test_smoothstep5_properties():
    s = np.linspace(-0.5, 1.5, 2001)
    v = smoothstep5(s)
    assert v[s <= 0].max() == 0.0 and v[s >= 1].min() == 1.0
    assert np.all(np.diff(v) >= 0)
    assert smoothstep5(0.5) == 0.5


@pytest.fixture(scope="module")
def calibrated():
    out = {}
    # all-pairs at i = 4 is too dense for a desk-scale grid; the nearest-neighbour network keeps the symmetry
    for i, n, policy in ((1, 128, "all_pairs"), (2, 128, "all_pairs"), (4, 256, "nearest_neighbors")):
        g = GridSpec(n)
        s = build_skeleton(i, policy)
        spec = calibrate_width(g, i, s)
        out[i] = (g, s, spec, build_initial_factor(g, spec, s))
    return out


def test_initial_factor_range_and_exact_values(calibrated):
    g, s, spec, u0 = calibrated[2]
    assert u0.min() == 1.0 and u0.max() == 2.0
    d = distance_to_skeleton(g, s).values
    assert np.all(u0.values[d <= 1e-15] == 1.0)
    assert np.all(u0.values[d >= spec.width + spec.transition] == 2.0)


def test_lattice_translation_symmetry_on_grid(calibrated):
    g, _, _, u0 = calibrated[4]
    step = g.n // 4
    for a, b in ((step, 0), (0, step), (step, step)):
        assert np.array_equal(u0.translate(a, b).values, u0.values)


def _segment_key(p, disp):
    mx, my = (p.x + disp[0] / 2) % 1.0, (p.y + disp[1] / 2) % 1.0
    dx, dy = disp if (disp[0], disp[1]) > (0, 0) else (-disp[0], -disp[1])
    return tuple(round(c, 12) % 1.0 for c in (mx, my)) + (round(dx, 12), round(dy, 12))


def test_odd_order_skeleton_is_lattice_periodic():
    s = build_skeleton(3)
    keys = {_segment_key(seg.start, seg.disp) for seg in s.segments}
    assert len(keys) == len(s.segments)
    for a, b in ((1 / 3, 0), (0, 1 / 3)):
        moved = {_segment_key(seg.start.shifted(a, b), seg.disp) for seg in s.segments}
        assert moved == keys


def test_tie_break_breaks_even_order_periodicity():
    s = build_skeleton(2)
    seg = next(x for x in s.segments if x.start.as_tuple() == (0.0, 0.0) and x.end.as_tuple() == (0.0, 0.5))
    assert seg.disp == (0.0, 0.5)
    keys = {_segment_key(x.start, x.disp) for x in s.segments}
    moved = {_segment_key(x.start.shifted(0, 0.5), x.disp) for x in s.segments}
    assert moved != keys


@pytest.mark.parametrize("i", [1, 2, 4])
def test_calibration_area_and_monotonicity(calibrated, i):
    g, _, spec, u0 = calibrated[i]
    assert integrate(u0) >= 2 - 1 / i
    assert integrate(u0) == spec.achieved_area
    assert area_is_monotone(spec)
    assert 1.5 * g.h <= spec.width <= 0.25 and spec.transition == spec.width


def test_calibration_order_three_unaligned():
    g, s = GridSpec(256), build_skeleton(3)
    spec = calibrate_width(g, 3, s)
    u0 = build_initial_factor(g, spec, s, allow_unaligned=True)
    assert integrate(u0) >= 2 - 1 / 3
    assert area_is_monotone(spec)


def test_calibration_errors():
    with pytest.raises(ResolutionTooCoarse):
        calibrate_width(GridSpec(32), 4, build_skeleton(4))
    s3 = build_skeleton(3)
    spec = InitialFactorSpec(3, 0.05, 0.05)
    with pytest.raises(GridAlignment):
        build_initial_factor(GridSpec(64), spec, s3)
    u = build_initial_factor(GridSpec(64), spec, s3, allow_unaligned=True)
    assert 1.0 <= u.min() and u.max() <= 2.0
    with pytest.raises(ResolutionTooCoarse):
        build_initial_factor(GridSpec(64), InitialFactorSpec(3, 0.01, 0.01), s3, allow_unaligned=True)
