"""Duration Monte Carlo: reset semantics, statistics, memory arithmetic."""

import math

import numpy as np
import pytest

from netstab.cli import reference_timings
from netstab.schedule import (
    DurationStats,
    LevelTiming,
    duration_histogram,
    memory_error,
    min_duration,
    rate_from_lifetime,
    render_stats,
    sample_durations,
    sheet_time,
    simulate_duration,
)


def test_single_sure_level():
    levels = [LevelTiming(5, None, None)]
    stats = simulate_duration(levels, 500, seed=0)
    assert stats.mean == 5.0
    assert stats.quantiles[0.5] == 5
    assert stats.min_duration == 5
    assert stats.p_min == 1.0


def test_geometric_retry_mean():
    # one self-resetting level with p = 0.5 and t = 1: mean attempts 1/p = 2
    levels = [LevelTiming(1, 0.5, 1)]
    stats = simulate_duration(levels, 200000, seed=7)
    assert stats.mean == pytest.approx(2.0, abs=0.02)


def test_min_duration_expedient():
    t, p = min_duration(reference_timings("EXPEDIENT"))
    assert t == 33
    assert p == pytest.approx(0.2242, abs=0.0004)


def test_min_duration_stringent():
    t, p = min_duration(reference_timings("STRINGENT"))
    assert t == 63
    assert p == pytest.approx(0.0422, abs=0.0002)


def test_min_duration_no_postselection():
    levels = [LevelTiming(3, None, None), LevelTiming(4, None, None)]
    assert min_duration(levels) == (7, 1.0)


def test_empirical_minimum_matches_product_serial():
    # under serial semantics the all-first-try branch has probability
    # exactly the product of the per-row success rates
    levels = reference_timings("EXPEDIENT")
    durations = sample_durations(levels, 100000, seed=3, semantics="serial")
    t_min, p_min = min_duration(levels)
    assert durations.min() == t_min
    freq = float((durations == t_min).mean())
    se = math.sqrt(p_min * (1 - p_min) / len(durations))
    assert abs(freq - p_min) <= 3 * se


def test_parallel_minimum_is_sum_of_times():
    levels = reference_timings("EXPEDIENT")
    durations = sample_durations(levels, 20000, seed=3, semantics="parallel")
    assert durations.min() == 33


def test_reproducible_across_worker_counts():
    levels = reference_timings("EXPEDIENT")
    a = simulate_duration(levels, 5000, seed=11, workers=1)
    b = simulate_duration(levels, 5000, seed=11, workers=4)
    assert a == b


def test_quantiles_monotone_and_mean_above_min():
    levels = reference_timings("STRINGENT")
    stats = simulate_duration(levels, 20000, seed=5)
    qs = [stats.quantiles[q] for q in sorted(stats.quantiles)]
    assert qs == sorted(qs)
    assert stats.mean >= stats.min_duration


def test_sheet_time():
    stats = DurationStats(10.0, {0.5: 8, 0.99: 20}, 5, 0.5, 100)
    assert sheet_time(stats, 0.99) == 20
    with pytest.raises(ValueError):
        sheet_time(stats, 0.95)


def test_sheet_time_single_sure_level():
    levels = [LevelTiming(4, None, None)]
    stats = simulate_duration(levels, 100, seed=0)
    assert sheet_time(stats, 0.5) == 4


def test_memory_error_lifetime_arithmetic():
    rate = rate_from_lifetime(2.0)
    assert rate == pytest.approx(0.5)
    assert memory_error(rate, 1.0) == pytest.approx(0.393, abs=0.001)
    assert memory_error(rate, 0.002) == pytest.approx(1.0e-3, abs=0.5e-4)
    assert memory_error(rate, 0.0) == 0.0


def test_memory_error_validation():
    with pytest.raises(ValueError):
        memory_error(-1.0, 1.0)
    with pytest.raises(ValueError):
        rate_from_lifetime(0.0)


def test_histogram_counts():
    d = np.array([3, 3, 5, 7, 7, 7])
    assert duration_histogram(d) == [(3, 2), (5, 1), (7, 3)]


def test_render_stats_parses():
    levels = [LevelTiming(2, 0.9, 1)]
    stats = simulate_duration(levels, 100, seed=1)
    text = render_stats(stats)
    assert text.startswith("netstab-duration-stats/1")
    assert "min 2" in text


def test_invalid_inputs():
    with pytest.raises(ValueError):
        simulate_duration([LevelTiming(1, 0.5, 1)], 0, seed=1)
    with pytest.raises(ValueError):
        simulate_duration([LevelTiming(1, 0.5, 1)], 10, seed=1, semantics="quantum")
    with pytest.raises(ValueError):
        LevelTiming(-1, 0.5, 1)
    with pytest.raises(ValueError):
        LevelTiming(1, 0.0, 1)
