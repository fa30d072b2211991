"""Protocol definitions: structure, timing, validation, serialization."""

import pytest

from netstab.protocols import (
    AbortFilterOutcome,
    dump_protocol,
    expedient,
    get_protocol,
    load_protocol,
    monolithic,
    stringent,
    stringent_plus,
    validate,
)


class TestExpedient:
    def test_level_times(self):
        spec = expedient()
        assert [lv.t_steps for lv in spec.levels] == [7, 6, 4, 3, 2, 4, 3, 2, 2]
        assert sum(lv.t_steps for lv in spec.levels) == 33

    def test_frls(self):
        spec = expedient()
        assert [lv.frl for lv in spec.levels] == [1, 1, 3, 3, 1, 6, 7, 1, None]

    def test_parallel_groups(self):
        spec = expedient()
        groups = [lv.parallel_group for lv in spec.levels]
        assert groups[0] == groups[1] is not None
        assert groups[2] == groups[3] is not None
        assert groups[5] == groups[6] is not None
        assert groups[4] is None and groups[7] is None

    def test_validates(self):
        assert validate(expedient()) == []
        assert validate(expedient("X")) == []


class TestStringent:
    def test_level_times(self):
        spec = stringent()
        assert [lv.t_steps for lv in spec.levels] == [
            7, 6, 4, 3, 5, 4, 3, 5, 4, 3, 5, 4, 3, 5, 2
        ]
        assert sum(lv.t_steps for lv in spec.levels) == 63

    def test_frls(self):
        spec = stringent()
        assert [lv.frl for lv in spec.levels] == [
            1, 1, 3, 3, 1, 6, 6, 1, 9, 9, 1, 12, 12, 1, None
        ]

    def test_validates(self):
        assert validate(stringent()) == []
        assert validate(stringent("X")) == []


class TestMonolithic:
    def test_six_elementary_steps(self):
        spec = monolithic()
        assert len(spec.levels) == 1
        assert spec.levels[0].t_steps == 6

    def test_no_network_noise_reference(self):
        spec = monolithic()
        kinds = {g.kind for lv in spec.levels for step in lv.steps for g in step}
        assert "BELL_RAW" not in kinds

    def test_validates(self):
        assert validate(monolithic()) == []
        assert validate(monolithic("X")) == []


class TestStringentPlus:
    def test_four_ancillas_per_cell(self):
        spec = stringent_plus()
        assert spec.ancillas_per_cell == 4

    def test_filter_present(self):
        spec = stringent_plus()
        assert spec.filter_spec is not None
        names = {c.name for lv in spec.levels for c in lv.checks}
        assert "filter" in names

    def test_unfiltered_variant(self):
        spec = stringent_plus(filtered=False)
        assert spec.filter_spec is None
        assert validate(spec) == []

    def test_validates(self):
        assert validate(stringent_plus()) == []


def test_abort_outcome_cases():
    AbortFilterOutcome("PASS")
    AbortFilterOutcome("FAIL_GOOD")
    with pytest.raises(ValueError):
        AbortFilterOutcome("MAYBE")


def test_get_protocol_names():
    assert get_protocol("expedient").name == "EXPEDIENT"
    assert get_protocol("stringent-plus").name == "STRINGENT_PLUS"
    assert get_protocol("STRINGENT+").name == "STRINGENT_PLUS"
    with pytest.raises(ValueError):
        get_protocol("nope")


class TestValidateCatchesBreakage:
    def test_bad_frl(self):
        import dataclasses

        spec = expedient()
        bad = dataclasses.replace(spec.levels[2], frl=7)
        levels = list(spec.levels)
        levels[2] = bad
        spec2 = dataclasses.replace(spec, levels=tuple(levels))
        assert any("frl" in v for v in validate(spec2))

    def test_dangling_qubit(self):
        import dataclasses

        from netstab.pauli import CliffordGateSpec

        spec = monolithic()
        step = ((CliffordGateSpec("MEAS_Z", (99,)),),)
        bad = dataclasses.replace(spec.levels[0], steps=spec.levels[0].steps + step)
        spec2 = dataclasses.replace(spec, levels=(bad,))
        assert any("out of range" in v for v in validate(spec2))

    def test_wrong_step_count(self):
        import dataclasses

        spec = expedient()
        bad = dataclasses.replace(spec.levels[0], t_steps=12)
        spec2 = dataclasses.replace(spec, levels=(bad,) + spec.levels[1:])
        assert any("declared t=" in v for v in validate(spec2))


class TestDeclarativeFormat:
    def test_roundtrip(self):
        for build in (expedient, stringent, monolithic, stringent_plus):
            spec = build()
            text = dump_protocol(spec)
            back = load_protocol(text)
            assert back == spec

    def test_bad_format_rejected(self):
        with pytest.raises(ValueError):
            load_protocol('{"format": "something-else"}')
