"""The three noise sources as Pauli channels.

p_g: depolarizing noise after every two-qubit gate (uniform over the 15
non-identity two-qubit Paulis; the single-qubit variant splits over 3).
p_m: measurement readout flip, also used as preparation infidelity.
p_n: raw network Bell pairs arrive in Werner form, the error probability
split uniformly over the three non-identity classes on one member.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pauli import LETTERS, PauliString


@dataclass(frozen=True)
class NoiseParams:
    """Error rates for local gates (p_g), measurement/initialization (p_m),
    and raw network Bell pairs (p_n)."""

    p_g: float = 0.0
    p_m: float = 0.0
    p_n: float = 0.0

    def __post_init__(self):
        for name in ("p_g", "p_m", "p_n"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")


def gate_channel(p_g: float, arity: int) -> list[tuple[PauliString, float]]:
    """Uniform depolarizing channel on 1 or 2 qubits with total error p_g."""
    if arity not in (1, 2):
        raise ValueError("arity must be 1 or 2")
    n_err = 4**arity - 1
    channel = [(PauliString(arity), 1.0 - p_g)]
    share = p_g / n_err
    if arity == 1:
        for letter in "XYZ":
            channel.append((PauliString.from_letters(letter), share))
    else:
        for a in LETTERS:
            for b in LETTERS:
                if a == b == "I":
                    continue
                channel.append((PauliString.from_letters(a + b), share))
    return channel


def measurement_flip_prob(p_m: float) -> float:
    """Readout flip probability; initialization is modeled as perfect prep
    followed by a flip of the same strength in the orthogonal basis."""
    if not 0.0 <= p_m <= 1.0:
        raise ValueError("p_m outside [0, 1]")
    return p_m


def raw_bell_channel(p_n: float) -> list[tuple[PauliString, float]]:
    """Error channel of a raw network Bell pair (Werner form).

    Identity with probability 1 - p_n; the three error classes, represented
    as X, Y, Z acting on the second member, each carry p_n / 3.
    """
    if not 0.0 <= p_n <= 1.0:
        raise ValueError("p_n outside [0, 1]")
    channel = [(PauliString(2), 1.0 - p_n)]
    for letter in "XYZ":
        channel.append((PauliString.from_letters("I" + letter), p_n / 3.0))
    return channel
