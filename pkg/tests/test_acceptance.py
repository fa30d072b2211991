"""Acceptance suite: one test per criterion, each printing a PASS line.

Settings (grids, tolerances, sample counts) are pinned here; nothing is
deferred to later calibration.  The threshold sweeps dominate the runtime
(tens of minutes single-core at the mandated 10^4 samples/point).
"""

import math
import random

import numpy as np
import pytest

from netstab.cli import CALIBRATION_REFERENCE, reference_timings
from netstab.lattice import (
    AbortCaseSampler,
    CodeLattice,
    SuperopSampler,
    build_matching_graph,
    correction_from_matching,
    edge_weights_from_superop,
    logical_error_rate,
    mwpm_decode,
    sample_syndrome_history,
    logical_failure,
)
from netstab.matching import matching_weight, min_weight_perfect_matching
from netstab.noise import NoiseParams
from netstab.protocols import expedient, monolithic, stringent
from netstab.schedule import memory_error, rate_from_lifetime, sample_durations, simulate_duration
from netstab.superop import (
    StabilizerSuperoperator,
    aggregate,
    extract_stringent_plus,
    extract_superoperator,
    success_probabilities,
    twirl,
)
from netstab.threshold import find_crossing, sweep_local, sweep_network

CASE1_NOISE = NoiseParams(0.006, 0.006, 0.1)
CASE2_NOISE = NoiseParams(0.0075, 0.0075, 0.1)
CASE3_NOISE = NoiseParams(0.009, 0.009, 0.0)
SPLUS_NOISE = NoiseParams(0.0077, 0.0077, 0.1)


def report(criterion, ok, detail=""):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def case1_so():
    return extract_superoperator(expedient(), CASE1_NOISE)


@pytest.fixture(scope="module")
def case1_pair(case1_so):
    so_x = extract_superoperator(expedient("X"), CASE1_NOISE)
    return twirl(case1_so), twirl(so_x)


@pytest.fixture(scope="module")
def splus_extractions():
    return (
        extract_stringent_plus(SPLUS_NOISE, basis="Z", eps=1e-12),
        extract_stringent_plus(SPLUS_NOISE, basis="X", eps=1e-12),
    )


def test_criterion_1_normalization_and_exactness(case1_so):
    cases = [
        ("case1", case1_so),
        ("case2", extract_superoperator(stringent(), CASE2_NOISE, eps=1e-14)),
        ("case3", extract_superoperator(monolithic(), CASE3_NOISE)),
    ]
    details = []
    ok = True
    for name, so in cases:
        total_dev = abs(so.total() - 1.0)
        ok = ok and total_dev <= 1e-9 and so.truncated_mass < 1e-6
        details.append(f"{name}: |1-total|={total_dev:.1e} trunc={so.truncated_mass:.1e}")
    report(1, ok, "; ".join(details))


def test_criterion_2_weight_table(case1_so):
    t1 = aggregate(twirl(case1_so))
    a1, b1 = t1.get("1", "A"), t1.get("1", "B")
    ok = abs(a1 - 0.9117) <= 0.01 and abs(b1 - 0.0617) <= 0.01
    singles_ok = True
    for label, pub in (("Z", 0.00681), ("X", 0.00314), ("Y", 0.00314)):
        got = t1.get(label, "A")
        singles_ok = singles_ok and (pub / 1.5 <= got <= pub * 1.5)
    so3 = extract_superoperator(monolithic(), CASE3_NOISE)
    a1_mono = aggregate(so3).get("1", "A")
    mono_ok = abs(a1_mono - 0.951) <= 0.01
    report(
        2,
        ok and singles_ok and mono_ok,
        f"case1 A_1={a1:.4f} B_1={b1:.4f}; case3 A_1={a1_mono:.4f}; singles within x1.5: {singles_ok}",
    )


def test_criterion_3_calibration_oracle():
    worst = 0.0
    for name in ("EXPEDIENT", "STRINGENT"):
        ref = CALIBRATION_REFERENCE[name]
        noise = NoiseParams(*ref["noise"])
        spec = expedient() if name == "EXPEDIENT" else stringent()
        levels = success_probabilities(spec, noise)
        for ls, pub in zip(levels, ref["p_levels"]):
            worst = max(worst, abs(ls.probability - pub))
    report(3, worst <= 0.005, f"worst |delta| over 22 levels = {worst:.4f}")


def test_criterion_4_duration_statistics():
    lv = reference_timings("EXPEDIENT")
    stats = simulate_duration(lv, 100000, seed=41, semantics="parallel")
    durations = sample_durations(lv, 100000, seed=41, semantics="parallel")
    checks = [
        ("min", int(durations.min()) == 33),
        ("p_min", abs(stats.p_min - 0.2242) <= 0.004),
        ("mean", abs(stats.mean - 68.2) <= 2),
        ("median", abs(stats.quantiles[0.5] - 57) <= 3),
        ("q95", abs(stats.quantiles[0.95] - 138) <= 7),
        ("q99", abs(stats.quantiles[0.99] - 195) <= 10),
        ("q999", abs(stats.quantiles[0.999] - 278) <= 20),
    ]
    lv = reference_timings("STRINGENT")
    s2 = simulate_duration(lv, 100000, seed=42, semantics="parallel")
    d2 = sample_durations(lv, 100000, seed=42, semantics="parallel")
    checks += [
        ("s-min", int(d2.min()) == 63),
        ("s-p_min", abs(s2.p_min - 0.0422) <= 0.002),
        ("s-mean", abs(s2.mean - 278) <= 8),
        ("s-q99", abs(s2.quantiles[0.99] - 1067) <= 50),
    ]
    failed = [name for name, ok in checks if not ok]
    detail = (
        f"E: mean={stats.mean:.1f} med={stats.quantiles[0.5]} q99={stats.quantiles[0.99]}; "
        f"S: mean={s2.mean:.1f} q99={s2.quantiles[0.99]}"
    )
    report(4, not failed, detail + (f"; failed: {failed}" if failed else ""))


def test_criterion_5_memory_arithmetic():
    rate = rate_from_lifetime(2.0)
    per_second = memory_error(rate, 1.0)
    over_protocol = memory_error(rate, 0.002)
    ok = abs(per_second - 0.393) <= 0.001 and abs(over_protocol - 1.0e-3) <= 0.5e-4
    report(5, ok, f"1s: {per_second:.4f}; 2ms: {over_protocol:.2e}")


def _all_perfect_matchings(nodes):
    if not nodes:
        yield []
        return
    v = nodes[0]
    for u in nodes[1:]:
        rest = [x for x in nodes if x not in (v, u)]
        for m in _all_perfect_matchings(rest):
            yield [(v, u)] + m


def test_criterion_6_decoder_oracle(case1_pair):
    so_z, so_x = case1_pair
    # exact-matching oracle on randomly weighted <= 8-defect instances
    rng = random.Random(606)
    mismatches = 0
    for _ in range(1000):
        n = rng.choice([2, 4, 6, 8])
        edges = [
            (i, j, round(rng.uniform(0.01, 10.0), 9))
            for i in range(n)
            for j in range(i + 1, n)
        ]
        pairs = min_weight_perfect_matching(n, edges)
        got = matching_weight(pairs, edges)
        wmap = {(i, j): w for i, j, w in edges}
        best = min(
            sum(wmap[(min(a, b), max(a, b))] for a, b in m)
            for m in _all_perfect_matchings(list(range(n)))
        )
        if abs(got - best) > 1e-9:
            mismatches += 1
    # decoded samples must return to the codespace (logical_failure raises
    # on any residual syndrome)
    per_d = 3334
    for d in (3, 4, 5):
        lat = CodeLattice(d, d)
        logical_error_rate(lat, so_z, so_x, samples=per_d, seed=600 + d)
    report(6, mismatches == 0, f"oracle mismatches: {mismatches}/1000; codespace verified on {3*per_d} samples")


def test_criterion_7_threshold_brackets():
    mono = sweep_local(
        "MONOLITHIC", [0.008, 0.0085, 0.009, 0.0095, 0.0105], 0.0, [4, 6],
        samples=10000, seed=11000,
    )
    c_mono = find_crossing(mono)
    mono_ok = (
        c_mono.resolved and 0.008 <= c_mono.lower and c_mono.upper <= 0.0105
    )

    net = sweep_network(
        "EXPEDIENT", [0.090, 0.095, 0.100, 0.105, 0.110], 0.006, [4, 6],
        samples=10000, seed=12000,
    )
    c_net = find_crossing(net)
    net_ok = c_net.resolved and 0.095 <= c_net.lower and c_net.upper <= 0.105

    rev = sweep_local("EXPEDIENT", [0.004, 0.012], 0.1, [4, 6], samples=10000, seed=13000)
    by = {(round(p.noise.p_g, 4), p.d): p for p in rev}
    lo4, lo6 = by[(0.004, 4)], by[(0.004, 6)]
    hi4, hi6 = by[(0.012, 4)], by[(0.012, 6)]
    sep_lo = (lo4.rate - lo6.rate) / math.hypot(lo4.stderr, lo6.stderr)
    sep_hi = (hi6.rate - hi4.rate) / math.hypot(hi4.stderr, hi6.stderr)
    rev_ok = sep_lo >= 3.0 and sep_hi >= 3.0

    report(
        7,
        mono_ok and net_ok and rev_ok,
        f"mono crossing=[{c_mono.lower}, {c_mono.upper}]; "
        f"network crossing=[{c_net.lower}, {c_net.upper}]; "
        f"reversal separations {sep_lo:.1f}/{sep_hi:.1f} sigma",
    )


def _mixture(extraction):
    entries = {}
    for case, so in extraction.superops.items():
        w = extraction.case_probs[case]
        for key, v in so.entries.items():
            entries[key] = entries.get(key, 0.0) + w * v
    any_so = next(iter(extraction.superops.values()))
    return StabilizerSuperoperator(
        any_so.basis, any_so.n_data, entries, "STRINGENT_PLUS", extraction.noise
    )


def test_criterion_8_stringent_plus(splus_extractions):
    exz, exx = splus_extractions
    cp = exz.case_probs
    cases_ok = (
        abs(cp["PASS"] - 0.92) <= 0.02
        and abs(cp["FAIL_GOOD"] - 0.04) <= 0.02
        and abs(cp["FAIL_BAD"] - 0.04) <= 0.02
    )

    # extra-error channel: the filtered protocol carries more risk than
    # plain STRINGENT at equal noise
    mz = _mixture(exz)
    a1_splus = aggregate(mz).get("1", "A")
    so_str = extract_superoperator(stringent(), SPLUS_NOISE, eps=1e-12, trunc_budget=1e-3)
    a1_str = aggregate(so_str).get("1", "A")
    extra_ok = a1_splus <= a1_str

    # paired comparison: flag-aware decoding no worse than flag-blind
    mx = _mixture(exx)
    wz = edge_weights_from_superop(mz, mx)
    wx = edge_weights_from_superop(mx, mz)
    sampler = AbortCaseSampler.from_extraction(exz, exx)
    lat = CodeLattice(4, 4)
    tables = SuperopSampler(lat, mz, mx, None)
    n = 6000
    diffs = np.zeros(n, dtype=np.int64)
    for i in range(n):
        rng = np.random.default_rng((808, i))
        hist, err = sample_syndrome_history(
            lat, mz, mx, rng, abort_sampler=sampler, sampler=tables
        )
        res = {}
        for use_flags in (True, False):
            fl = hist.flags if use_flags else None
            gz = build_matching_graph(
                hist.detection_events_z, lat, wz, "Z", fl, hist.missing, 0.5
            )
            gx = build_matching_graph(
                hist.detection_events_x, lat, wx, "X", fl, hist.missing, 0.5
            )
            cx = correction_from_matching(lat, "Z", gz, mwpm_decode(gz))
            cz = correction_from_matching(lat, "X", gx, mwpm_decode(gx))
            res[use_flags] = logical_failure(lat, err, cx, cz)
        diffs[i] = res[True] - res[False]
    mean = diffs.mean()
    se = diffs.std(ddof=1) / math.sqrt(n)
    flag_ok = mean <= 0.0 and (se == 0.0 or -mean / se >= 2.0)
    report(
        8,
        cases_ok and extra_ok and flag_ok,
        f"cases PASS/GOOD/BAD = {cp['PASS']:.3f}/{cp['FAIL_GOOD']:.3f}/{cp['FAIL_BAD']:.3f}; "
        f"A_1 {a1_splus:.3f} <= {a1_str:.3f}; paired diff {mean:.5f} +- {se:.5f}",
    )


def test_criterion_9_reproducibility(case1_pair):
    so_z, so_x = case1_pair
    lat = CodeLattice(4, 4)
    a = logical_error_rate(lat, so_z, so_x, samples=400, seed=90, workers=1)
    b = logical_error_rate(lat, so_z, so_x, samples=400, seed=90, workers=3)
    rate_ok = a == b

    lv = reference_timings("EXPEDIENT")
    s1 = simulate_duration(lv, 20000, seed=91, workers=1)
    s2 = simulate_duration(lv, 20000, seed=91, workers=8)
    dur_ok = s1 == s2

    from netstab.superop import serialize_superoperator

    text1 = serialize_superoperator(extract_superoperator(expedient(), CASE1_NOISE))
    text2 = serialize_superoperator(extract_superoperator(expedient(), CASE1_NOISE))
    extract_ok = text1 == text2
    report(9, rate_ok and dur_ok and extract_ok, "decode, duration, extraction all bit-identical")
