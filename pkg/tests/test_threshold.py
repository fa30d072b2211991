"""Crossing detection on synthetic fixtures, plus a miniature sweep."""

import pytest

from netstab.noise import NoiseParams
from netstab.threshold import CrossingResult, SweepPoint, find_crossing, sweep_local


def pt(p, d, rate, stderr, p_n=0.1):
    return SweepPoint(
        NoiseParams(p, p, p_n), d, d, "X", 1000, int(rate * 1000), rate, stderr, 7
    )


def synthetic_crossing(p_c=0.01):
    # small-d and large-d rate curves crossing exactly at p_c
    points = []
    for p in (0.006, 0.008, 0.009, 0.011, 0.012, 0.014):
        r4 = 0.05 + 2.0 * (p - p_c)
        r6 = 0.05 + 6.0 * (p - p_c)
        points.append(pt(p, 4, r4, 0.001))
        points.append(pt(p, 6, r6, 0.001))
    return points


def test_synthetic_crossing_contains_true_value():
    res = find_crossing(synthetic_crossing())
    assert res.resolved
    assert res.lower <= 0.01 <= res.upper
    assert res.lower == 0.009 and res.upper == 0.011


def test_invariant_under_reordering_and_duplication():
    points = synthetic_crossing()
    res = find_crossing(points)
    shuffled = list(reversed(points)) + points[:4]
    res2 = find_crossing(shuffled)
    assert (res.lower, res.upper, res.resolved) == (res2.lower, res2.upper, res2.resolved)


def test_one_sided_unresolved():
    points = [p for p in synthetic_crossing() if p.noise.p_g < 0.0095]
    res = find_crossing(points)
    assert not res.resolved
    assert res.lower is None and res.upper is None


def test_overlapping_error_bars_unresolved():
    points = []
    for p in (0.006, 0.009, 0.012):
        points.append(pt(p, 4, 0.05, 0.05))
        points.append(pt(p, 6, 0.05, 0.05))
    res = find_crossing(points)
    assert not res.resolved


def test_too_few_noise_values_unresolved():
    points = [pt(0.01, 4, 0.1, 0.001), pt(0.01, 6, 0.2, 0.001)]
    assert not find_crossing(points).resolved


def test_single_distance_unresolved():
    points = [pt(p, 4, 0.1, 0.001) for p in (0.006, 0.009, 0.012)]
    assert not find_crossing(points).resolved


def test_network_axis_detected():
    # crossing along p_n at fixed local rates
    points = []
    for p_n in (0.08, 0.10, 0.12):
        for d, slope in ((4, 1.0), (6, 3.0)):
            rate = 0.05 + slope * (p_n - 0.1)
            points.append(
                SweepPoint(NoiseParams(0.006, 0.006, p_n), d, d, "E", 1000,
                           int(rate * 1000), rate, 0.002, 1)
            )
    res = find_crossing(points)
    assert res.resolved
    assert res.lower == 0.08 and res.upper == 0.12


def test_miniature_local_sweep_runs():
    points = sweep_local(
        "MONOLITHIC", [0.002, 0.02], 0.0, [3, 4], samples=60, seed=5
    )
    assert len(points) == 4
    lo = [p for p in points if p.noise.p_g == 0.002]
    hi = [p for p in points if p.noise.p_g == 0.02]
    assert max(p.rate for p in lo) <= min(p.rate for p in hi) + 0.2
    for p in points:
        assert p.stderr >= 0


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        sweep_local("MONOLITHIC", [], 0.0, [3], 10, 1)
