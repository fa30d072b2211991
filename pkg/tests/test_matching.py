"""Blossom matcher against an exhaustive enumeration oracle."""

import itertools
import random

import pytest

from netstab.matching import (
    MatchingError,
    matching_weight,
    max_weight_matching,
    min_weight_perfect_matching,
)


def brute_force_min_perfect(n, edges):
    """Minimum perfect-matching weight by explicit enumeration, or None."""
    wt = {frozenset((i, j)): w for i, j, w in edges}
    best = None

    def rec(rem, acc):
        nonlocal best
        if not rem:
            if best is None or acc < best:
                best = acc
            return
        v = rem[0]
        for u in rem[1:]:
            key = frozenset((v, u))
            if key in wt:
                rec([x for x in rem if x not in (v, u)], acc + wt[key])

    rec(list(range(n)), 0.0)
    return best


def test_two_nodes_single_edge():
    assert min_weight_perfect_matching(2, [(0, 1, 3.5)]) == [(0, 1)]


def test_path_of_four_takes_outer_edges():
    # path 0-1-2-3 with unit weights: matchings are {01,23} (cost 2) only,
    # since 1-2 alone cannot be completed; add the chord 0-3 to enumerate
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 5.0)]
    pairs = min_weight_perfect_matching(4, edges)
    assert sorted(pairs) == [(0, 1), (2, 3)]
    assert matching_weight(pairs, edges) == 2.0


def test_blossom_needed_case():
    # odd cycle forces a blossom: triangle 0-1-2 plus pendant edges
    edges = [
        (0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0),
        (0, 3, 2.0), (1, 4, 8.0), (2, 5, 2.0), (3, 4, 9.0), (4, 5, 3.0),
    ]
    pairs = min_weight_perfect_matching(6, edges)
    bf = brute_force_min_perfect(6, edges)
    assert matching_weight(pairs, edges) == pytest.approx(bf)


def test_exhaustive_oracle_random_instances():
    rng = random.Random(20240817)
    checked = 0
    for _ in range(1000):
        n = rng.choice([2, 4, 6, 8])
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.8:
                    edges.append((i, j, round(rng.uniform(0.001, 10.0), 9)))
        bf = brute_force_min_perfect(n, edges)
        try:
            pairs = min_weight_perfect_matching(n, edges)
            got = matching_weight(pairs, edges)
        except MatchingError:
            got = None
        if bf is None:
            assert got is None
        else:
            assert got is not None
            assert got == pytest.approx(bf, abs=1e-9)
            assert len({v for p in pairs for v in p}) == n
        checked += 1
    assert checked == 1000


def test_odd_count_rejected():
    with pytest.raises(MatchingError):
        min_weight_perfect_matching(3, [(0, 1, 1.0), (1, 2, 1.0)])


def test_no_perfect_matching_detected():
    # 4 vertices, star around 0: vertices 2,3 cannot both be matched
    with pytest.raises(MatchingError):
        min_weight_perfect_matching(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])


def test_max_weight_matching_prefers_heavy_edge():
    # triangle with one heavy edge: maximum weight picks the heavy one
    mate = max_weight_matching([(0, 1, 5.0), (1, 2, 3.0), (0, 2, 3.0)])
    assert mate[0] == 1 and mate[1] == 0 and mate[2] == -1


def test_max_cardinality_beats_weight():
    # without maxcardinality the single heavy edge wins; with it, two edges
    edges = [(0, 1, 10.0), (1, 2, 1.0), (0, 3, 1.0)]
    mate = max_weight_matching(edges, maxcardinality=False)
    assert mate[0] == 1
    mate = max_weight_matching(edges, maxcardinality=True)
    assert mate[0] == 3 and mate[1] == 2
