"""Superoperator extraction: exactness oracle, twirl, aggregation, duality."""

import itertools

import pytest

from netstab.noise import NoiseParams
from netstab.pauli import PauliString
from netstab.protocols import (
    CliffordGateSpec,
    ProtocolLevel,
    ProtocolSpec,
    ReadoutSpec,
    expedient,
    monolithic,
    stringent,
)
from netstab.superop import (
    CORRECT,
    INCORRECT,
    CYCLIC_GROUP,
    StabilizerSuperoperator,
    aggregate,
    canonical_error,
    deserialize_superoperator,
    extract_superoperator,
    full_symmetric_group,
    serialize_superoperator,
    success_probabilities,
    twirl,
)

P = PauliString.from_letters


@pytest.fixture(scope="module")
def case1():
    return extract_superoperator(expedient(), NoiseParams(0.006, 0.006, 0.1))


# ---------------------------------------------------------------------------
# Brute-force oracle: a 1-data-qubit toy protocol, enumerated independently
# ---------------------------------------------------------------------------


def toy_spec() -> ProtocolSpec:
    """PREP_Z ancilla, one CNOT(data -> ancilla), measure ancilla in Z."""
    g = CliffordGateSpec
    steps = (
        (g("PREP_Z", (1,)),),
        (g("CNOT", (0, 1)),),
        (g("MEAS_Z", (1,)),),
    )
    level = ProtocolLevel(1, "toy", 3, None, steps, (), (), (1,))
    return ProtocolSpec("TOY", "Z", 1, 1, 2, (0,), (level,), ReadoutSpec((1,), "Z"))


def brute_force_toy(p_g: float, p_m: float) -> dict:
    """Enumerate every error insertion of the toy circuit explicitly.

    Independent of the package's propagation code: the CNOT conjugation is a
    hand-written lookup and errors are composed as letter pairs.
    """
    cnot = {  # (data, anc) -> (data, anc), control=data target=anc
        ("I", "I"): ("I", "I"), ("I", "X"): ("I", "X"),
        ("I", "Y"): ("Z", "Y"), ("I", "Z"): ("Z", "Z"),
        ("X", "I"): ("X", "X"), ("X", "X"): ("X", "I"),
        ("X", "Y"): ("Y", "Z"), ("X", "Z"): ("Y", "Y"),
        ("Y", "I"): ("Y", "X"), ("Y", "X"): ("Y", "I"),
        ("Y", "Y"): ("X", "Z"), ("Y", "Z"): ("X", "Y"),
        ("Z", "I"): ("Z", "I"), ("Z", "X"): ("Z", "X"),
        ("Z", "Y"): ("I", "Y"), ("Z", "Z"): ("I", "Z"),
    }
    mul = {}
    table = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
    back = {v: k for k, v in table.items()}
    for a in "IXYZ":
        for b in "IXYZ":
            xa, za = table[a]
            xb, zb = table[b]
            mul[(a, b)] = back[(xa ^ xb, za ^ zb)]

    gate_errors = [(("I", "I"), 1 - p_g)] + [
        ((a, b), p_g / 15)
        for a in "IXYZ"
        for b in "IXYZ"
        if (a, b) != ("I", "I")
    ]
    weights = {}
    for prep_flip, p1 in (("I", 1 - p_m), ("X", p_m)):
        # prep error happens before the CNOT: conjugate it through
        frame = cnot[("I", prep_flip)]
        for (ge_d, ge_a), p2 in gate_errors:
            f2 = (mul[(frame[0], ge_d)], mul[(frame[1], ge_a)])
            for meas_flip, p3 in ((0, 1 - p_m), (1, p_m)):
                flip = (1 if f2[1] in ("X", "Y") else 0) ^ meas_flip
                # data error class modulo the measured Z stabilizer
                data = f2[0]
                if data == "Z":
                    data = "I"
                elif data == "Y":
                    data = "X"
                key = (data, CORRECT if flip == 0 else INCORRECT)
                weights[key] = weights.get(key, 0.0) + p1 * p2 * p3
    return weights


def test_toy_extraction_matches_brute_force():
    p_g, p_m = 0.013, 0.004
    so = extract_superoperator(toy_spec(), NoiseParams(p_g, p_m, 0.0), eps=0.0)
    expected = brute_force_toy(p_g, p_m)
    assert so.truncated_mass == 0.0
    assert set((e.letters(), tag) for (e, tag) in so.entries) == set(expected)
    for (e, tag), w in so.entries.items():
        assert w == pytest.approx(expected[(e.letters(), tag)], abs=1e-15)


def test_zero_noise_extraction_is_ideal():
    so = extract_superoperator(expedient(), NoiseParams(0, 0, 0), eps=0.0)
    assert so.entries == {(P("IIII"), CORRECT): 1.0}
    assert so.truncated_mass == 0.0


def test_zero_noise_levels_always_succeed():
    levels = success_probabilities(expedient(), NoiseParams(0, 0, 0), eps=0.0)
    assert all(ls.probability == pytest.approx(1.0) for ls in levels)


def test_monolithic_case3_identity_weight():
    so = extract_superoperator(monolithic(), NoiseParams(0.009, 0.009, 0.0))
    table = aggregate(so)
    assert table.get("1", "A") == pytest.approx(0.951, abs=0.01)


def test_case1_normalization_and_exactness(case1):
    assert case1.total() == pytest.approx(1.0, abs=1e-9)
    assert case1.truncated_mass < 1e-6


def test_case1_weights(case1):
    table = aggregate(twirl(case1))
    assert table.get("1", "A") == pytest.approx(0.9117, abs=0.01)
    assert table.get("1", "B") == pytest.approx(0.0617, abs=0.01)
    for label, pub in (("Z", 0.00681), ("X", 0.00314), ("Y", 0.00314)):
        got = table.get(label, "A")
        assert pub / 1.5 <= got <= pub * 1.5


def test_outcome_independence(case1):
    so_odd = extract_superoperator(
        expedient(), NoiseParams(0.006, 0.006, 0.1), reported_outcome="odd"
    )
    for key, w in case1.entries.items():
        assert so_odd.entries[key] == pytest.approx(w, abs=1e-9)


def test_duality_x_basis_is_relabeled_z_basis(case1):
    so_x = extract_superoperator(expedient("X"), NoiseParams(0.006, 0.006, 0.1))
    swap = {"I": "I", "X": "Z", "Z": "X", "Y": "Y"}
    relabeled = {}
    for (e, tag), w in so_x.entries.items():
        e2 = canonical_error(
            P("".join(swap[op] for op in e.ops)), "Z"
        )
        relabeled[(e2, tag)] = relabeled.get((e2, tag), 0.0) + w
    for key in set(case1.entries) | set(relabeled):
        assert relabeled.get(key, 0.0) == pytest.approx(
            case1.entries.get(key, 0.0), abs=1e-9
        )


def test_monotonicity_identity_weight_decreases_with_local_noise():
    values = []
    for p in (0.004, 0.006, 0.008):
        so = extract_superoperator(expedient(), NoiseParams(p, p, 0.1))
        values.append(aggregate(so).get("1", "A"))
    assert values[0] > values[1] > values[2]


class TestTwirl:
    def test_identity_group_unchanged(self, case1):
        out = twirl(case1, group=((0, 1, 2, 3),))
        assert out.entries == case1.entries

    def test_total_preserved(self, case1):
        out = twirl(case1)
        assert out.total() == pytest.approx(case1.total(), abs=1e-12)

    def test_cyclic_orbit_equality(self, case1):
        out = twirl(case1, group=CYCLIC_GROUP)
        orbit = ["ZZII", "IZZI", "IIZZ", "ZIIZ"]
        vals = [out.weight(s, CORRECT) for s in orbit]
        assert vals[0] > 0
        for v in vals[1:]:
            assert v == pytest.approx(vals[0], rel=1e-12)

    def test_full_group_equalizes_class_members(self, case1):
        out = twirl(case1, group=full_symmetric_group(4))
        singles = ["ZIII", "IZII", "IIZI", "IIIZ"]
        vals = [out.weight(s, CORRECT) for s in singles]
        for v in vals[1:]:
            assert v == pytest.approx(vals[0], rel=1e-12)
        pairs = {"".join(s) for s in itertools.permutations("ZZII", 4)}
        vals = sorted({round(out.weight(s, CORRECT), 18) for s in pairs})
        assert len(vals) == 1

    def test_empty_group_rejected(self, case1):
        with pytest.raises(ValueError):
            twirl(case1, group=())

    def test_class_sums_invariant(self, case1):
        t1 = aggregate(twirl(case1, group=CYCLIC_GROUP))
        t2 = aggregate(twirl(case1, group=full_symmetric_group(4)))
        for key, v in t1.classes.items():
            assert t2.classes.get(key, 0.0) == pytest.approx(v, abs=1e-12)


class TestAggregate:
    def test_zero_noise(self):
        so = extract_superoperator(monolithic(), NoiseParams(0, 0, 0), eps=0.0)
        table = aggregate(so)
        assert table.get("1", "A") == pytest.approx(1.0)
        assert all(v == 0 for k, v in table.classes.items() if k != ("1", "A"))

    def test_classes_sum_to_total(self, case1):
        table = aggregate(case1)
        assert sum(table.classes.values()) == pytest.approx(case1.total(), abs=1e-12)


class TestSerialization:
    def test_roundtrip_exact(self, case1):
        text = serialize_superoperator(case1)
        back = deserialize_superoperator(text)
        assert back.basis == case1.basis
        assert back.noise == case1.noise
        assert set(back.entries) == set(case1.entries)
        for key, w in case1.entries.items():
            assert back.entries[key] == w  # bit-for-bit via repr round-trip

    def test_missing_basis_rejected(self):
        text = "netstab-superoperator/1\nn_data 4\np_g 0.0\np_m 0.0\np_n 0.0\nentries 0\nend\n"
        with pytest.raises(ValueError, match="basis"):
            deserialize_superoperator(text)

    def test_unknown_tag_rejected(self, case1):
        text = serialize_superoperator(case1).replace("CORRECT", "KORRECT", 1)
        with pytest.raises(ValueError, match="class label"):
            deserialize_superoperator(text)

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError, match="header"):
            deserialize_superoperator("something else\n")


def test_canonical_error_reduces_modulo_stabilizer():
    assert canonical_error(P("ZZZZ"), "Z") == P("IIII")
    assert canonical_error(P("ZZZI"), "Z") == P("IIIZ")
    assert canonical_error(P("XIII"), "Z") == P("XIII")
    assert canonical_error(P("XXXX"), "X") == P("IIII")
