"""Monte Carlo protocol-duration statistics under failure-reset semantics.

Each sample walks the protocol's levels in order, paying the level's time
steps per attempt; a failed post-selection resets control to the level's
failure-reset level (FRL) with the clock still running.  Two semantics are
available for levels marked as parallel pairs: the default ``serial`` mode
counts each table row once (the reading under which the minimum-duration
probability equals the published product of the per-level success rates),
while ``parallel`` runs two independent instances of each marked group and
lets the slower one gate progression.

Also houses the memory-error arithmetic used to budget idle-qubit decay over
a protocol's duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

QUANTILE_LEVELS = (0.5, 0.95, 0.99, 0.999)
SEMANTICS = ("serial", "parallel")


@dataclass(frozen=True)
class LevelTiming:
    """Scheduling view of one protocol level."""

    t: int
    p: float | None  # success probability; None for the final (always-completing) level
    frl: int | None  # 1-based failure reset level
    parallel_group: int | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("negative time steps")
        if self.p is not None and not 0.0 < self.p <= 1.0:
            raise ValueError("success probability must be in (0, 1]")


@dataclass
class DurationStats:
    mean: float
    quantiles: dict[float, int]
    min_duration: int
    p_min: float
    sample_count: int
    semantics: str = "serial"

    def quantile(self, level: float) -> int:
        if level in self.quantiles:
            return self.quantiles[level]
        raise KeyError(f"quantile {level} not computed; have {sorted(self.quantiles)}")


def min_duration(levels: list[LevelTiming]) -> tuple[int, float]:
    """Minimum possible duration and its probability.

    The minimum is the sum of all level times (every attempt succeeds); its
    probability is the product of the per-level success probabilities, each
    table row counted once.
    """
    t_min = sum(lv.t for lv in levels)
    p_min = 1.0
    for lv in levels:
        if lv.p is not None:
            p_min *= lv.p
    return t_min, p_min


def _walk_serial(levels: list[LevelTiming], rng) -> int:
    t = 0
    i = 0
    n = len(levels)
    while i < n:
        lv = levels[i]
        t += lv.t
        if lv.p is None or rng.random() < lv.p:
            i += 1
        else:
            i = (lv.frl or 1) - 1
    return t


def _group_spans(levels: list[LevelTiming]) -> list[tuple[int, int, int | None]]:
    """Contiguous spans of equal parallel_group: (start, end_exclusive, group)."""
    spans = []
    i = 0
    n = len(levels)
    while i < n:
        g = levels[i].parallel_group
        j = i + 1
        while j < n and levels[j].parallel_group == g and g is not None:
            j += 1
        if g is None:
            for k in range(i, j):
                spans.append((k, k + 1, None))
        else:
            spans.append((i, j, g))
        i = j
    return spans


def _walk_group_instance(levels, start, end, rng) -> tuple[int, int]:
    """One instance's time through a parallel span.

    Returns (elapsed, reset_target): reset_target is -1 on completion, else
    the level index of a failure that resets below the span (a hard failure
    that aborts both instances).
    """
    t = 0
    i = start
    while i < end:
        lv = levels[i]
        t += lv.t
        if lv.p is None or rng.random() < lv.p:
            i += 1
        else:
            frl_idx = (lv.frl or 1) - 1
            if frl_idx < start:
                return t, frl_idx
            i = frl_idx
    return t, -1


def _walk_group_synced(levels, start, end, rng) -> tuple[int, int]:
    """Two instances with a barrier at every level boundary: the trailing
    instance catches up while the leader waits, and the pair only proceeds
    once both pass the level."""
    ia = ib = start
    t = 0
    while ia < end or ib < end:
        lo = min(ia, ib)
        t += levels[lo].t
        na, nb = ia, ib
        if ia == lo and ia < end:
            lv = levels[ia]
            na = ia + 1 if (lv.p is None or rng.random() < lv.p) else (lv.frl or 1) - 1
        if ib == lo and ib < end:
            lv = levels[ib]
            nb = ib + 1 if (lv.p is None or rng.random() < lv.p) else (lv.frl or 1) - 1
        if na < start or nb < start:
            return t, min(x for x in (na, nb) if x < start)
        ia, ib = na, nb
    return t, -1


def _walk_parallel(levels: list[LevelTiming], spans, rng) -> int:
    """Two-instance semantics: short (level-pair) groups synchronize at each
    level boundary; longer instance pipelines run independently and gate
    the successor when the slower one completes.  Either way a failure
    resetting below the group restarts both instances."""
    t = 0
    si = 0
    while si < len(spans):
        start, end, group = spans[si]
        if group is not None:
            walker = _walk_group_synced if end - start <= 2 else _walk_group_instance
            if walker is _walk_group_synced:
                tg, reset = walker(levels, start, end, rng)
                t += tg
                resets = [reset] if reset >= 0 else []
            else:
                ta, ra = walker(levels, start, end, rng)
                tb, rb = walker(levels, start, end, rng)
                t += max(ta, tb)
                resets = [r for r in (ra, rb) if r >= 0]
            if resets:
                target = min(resets)
                si = next(
                    idx for idx, (s, e, _) in enumerate(spans) if s <= target < e
                )
            else:
                si += 1
        else:
            lv = levels[start]
            t += lv.t
            if lv.p is None or rng.random() < lv.p:
                si += 1
            else:
                frl_idx = (lv.frl or 1) - 1
                si = next(
                    idx for idx, (s, e, _) in enumerate(spans) if s <= frl_idx < e
                )
    return t


def simulate_duration(
    levels: list[LevelTiming],
    samples: int,
    seed: int,
    semantics: str = "serial",
    workers: int = 1,
) -> DurationStats:
    """Sample completion times; deterministic given (seed, samples, semantics).

    Per-sample RNG streams are derived from (seed, sample index), so the
    result is independent of worker count and scheduling.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}")
    durations = sample_durations(levels, samples, seed, semantics, workers)
    t_min, p_min = min_duration(levels)
    durations.sort()
    qs = {}
    for q in QUANTILE_LEVELS:
        idx = min(samples - 1, max(0, math.ceil(q * samples) - 1))
        qs[q] = int(durations[idx])
    return DurationStats(
        mean=float(durations.mean()),
        quantiles=qs,
        min_duration=t_min,
        p_min=p_min,
        sample_count=samples,
        semantics=semantics,
    )


def sample_durations(
    levels: list[LevelTiming],
    samples: int,
    seed: int,
    semantics: str = "serial",
    workers: int = 1,
) -> np.ndarray:
    spans = _group_spans(levels) if semantics == "parallel" else None
    out = np.empty(samples, dtype=np.int64)
    for i in range(samples):
        rng = np.random.default_rng((seed, i))
        if semantics == "serial":
            out[i] = _walk_serial(levels, rng)
        else:
            out[i] = _walk_parallel(levels, spans, rng)
    return out


def sheet_time(stats: DurationStats, completion_target: float) -> int:
    """Characteristic time for a sheet of stabilizers: the duration by which
    the target fraction of protocol instances has completed."""
    try:
        return stats.quantile(completion_target)
    except KeyError:
        raise ValueError(
            f"completion target {completion_target} outside computed quantiles"
        ) from None


# ---------------------------------------------------------------------------
# Memory errors
# ---------------------------------------------------------------------------


def rate_from_lifetime(lifetime_seconds: float) -> float:
    """Decay rate (per second) from a 1/e lifetime."""
    if lifetime_seconds <= 0:
        raise ValueError("lifetime must be positive")
    return 1.0 / lifetime_seconds


def memory_error(decay_rate: float, duration: float) -> float:
    """Probability of a memory error over ``duration`` at exponential decay."""
    if decay_rate < 0 or duration < 0:
        raise ValueError("rate and duration must be non-negative")
    return 1.0 - math.exp(-decay_rate * duration)


# ---------------------------------------------------------------------------
# Output rendering
# ---------------------------------------------------------------------------


def duration_histogram(durations: np.ndarray) -> list[tuple[int, int]]:
    values, counts = np.unique(durations, return_counts=True)
    return [(int(v), int(c)) for v, c in zip(values, counts)]


def render_stats(stats: DurationStats) -> str:
    lines = [
        "netstab-duration-stats/1",
        f"samples {stats.sample_count}",
        f"semantics {stats.semantics}",
        f"min {stats.min_duration}",
        f"p_min {stats.p_min!r}",
        f"mean {stats.mean!r}",
    ]
    for q in sorted(stats.quantiles):
        lines.append(f"q{q} {stats.quantiles[q]}")
    return "\n".join(lines) + "\n"
