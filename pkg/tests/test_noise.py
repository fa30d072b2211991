"""Noise channel definitions."""

import itertools

import pytest

from netstab.noise import NoiseParams, gate_channel, measurement_flip_prob, raw_bell_channel


def test_params_validated():
    NoiseParams(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        NoiseParams(p_g=-0.1)
    with pytest.raises(ValueError):
        NoiseParams(p_n=1.5)


def test_gate_channel_zero_noise():
    chan = gate_channel(0.0, 2)
    assert chan[0][1] == 1.0
    assert all(p == 0.0 for _, p in chan[1:])


def test_gate_channel_two_qubit_split():
    chan = gate_channel(0.006, 2)
    assert len(chan) == 16
    errors = [p for _, p in chan[1:]]
    assert all(p == pytest.approx(0.006 / 15) for p in errors)
    assert sum(p for _, p in chan) == pytest.approx(1.0, abs=1e-15)


def test_gate_channel_single_qubit():
    chan = gate_channel(0.03, 1)
    assert len(chan) == 4
    assert sum(p for _, p in chan) == pytest.approx(1.0, abs=1e-15)
    assert all(p == pytest.approx(0.01) for _, p in chan[1:])


def test_gate_channel_uniform_over_letters():
    # invariant under permutation of the non-identity letters
    chan = gate_channel(0.01, 2)
    by_weight = {}
    for e, p in chan[1:]:
        by_weight.setdefault(e.weight(), set()).add(round(p, 18))
    for probs in by_weight.values():
        assert len(probs) == 1


def test_measurement_flip_prob():
    assert measurement_flip_prob(0.0) == 0.0
    assert measurement_flip_prob(0.006) == 0.006
    assert measurement_flip_prob(0.0075) == 0.0075
    with pytest.raises(ValueError):
        measurement_flip_prob(1.2)


def test_raw_bell_channel():
    chan = raw_bell_channel(0.0)
    assert chan[0][1] == 1.0
    chan = raw_bell_channel(0.1)
    assert chan[0][1] == pytest.approx(0.9)
    assert [p for _, p in chan[1:]] == pytest.approx([1 / 30] * 3)
    assert sum(p for _, p in chan) == pytest.approx(1.0, abs=1e-15)


def test_raw_bell_channel_error_classes():
    chan = raw_bell_channel(0.3)
    letters = {e.letters() for e, p in chan[1:]}
    assert letters == {"IX", "IY", "IZ"}
