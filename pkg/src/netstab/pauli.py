"""Pauli-string algebra, Clifford conjugation, and sparse error-frame distributions.

Error frames are n-qubit Pauli strings with signs ignored: only the error
class matters, since measurement statistics depend on (anti)commutation with
the measured observables, never on global phase.  Strings are stored as a
pair of bitmasks (x, z) with bit i describing qubit i:

    (0,0) -> I    (1,0) -> X    (1,1) -> Y    (0,1) -> Z

Composition of frames is XOR of masks, which is exactly multiplication up to
sign.  A :class:`SparseErrorDist` maps frames to probabilities and is the
exact conditional error distribution carried through a Clifford circuit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

LETTERS = "IXYZ"

# (x bit, z bit) per letter, index aligned with LETTERS
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}

UNITARY_KINDS = frozenset({"CNOT", "CZ", "H", "SWAP"})
TWO_QUBIT_KINDS = frozenset({"CNOT", "CZ", "SWAP", "BELL_RAW"})
GATE_KINDS = frozenset(
    {"CNOT", "CZ", "H", "SWAP", "PREP_Z", "PREP_X", "MEAS_Z", "MEAS_X", "BELL_RAW"}
)


class DegeneratePostSelectionError(ValueError):
    """Raised when post-selection keeps a branch of zero probability."""


class PauliString:
    """Immutable Pauli error class on ``n`` qubits, signs ignored."""

    __slots__ = ("n", "x", "z")

    def __init__(self, n: int, x: int = 0, z: int = 0):
        if n < 0:
            raise ValueError("qubit count must be non-negative")
        if x >> n or z >> n:
            raise ValueError("mask exceeds declared qubit count")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    def __setattr__(self, *args):  # pragma: no cover - guard
        raise AttributeError("PauliString is immutable")

    def __reduce__(self):
        return (PauliString, (self.n, self.x, self.z))

    @classmethod
    def from_letters(cls, letters: str | Sequence[str]) -> "PauliString":
        x = z = 0
        for i, letter in enumerate(letters):
            try:
                xb, zb = _LETTER_BITS[letter]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {letter!r}") from None
            x |= xb << i
            z |= zb << i
        return cls(len(letters), x, z)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        xb, zb = _LETTER_BITS[letter]
        return cls(n, xb << qubit, zb << qubit)

    @property
    def ops(self) -> tuple[str, ...]:
        return tuple(
            _BITS_LETTER[(self.x >> i & 1, self.z >> i & 1)] for i in range(self.n)
        )

    def letters(self) -> str:
        return "".join(self.ops)

    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def compose(self, other: "PauliString") -> "PauliString":
        if other.n != self.n:
            raise ValueError("length mismatch")
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z)

    def sort_key(self) -> tuple[int, ...]:
        """Lexicographic key over per-qubit letters with I < X < Y < Z."""
        return tuple(
            LETTERS.index(_BITS_LETTER[(self.x >> i & 1, self.z >> i & 1)])
            for i in range(self.n)
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PauliString)
            and self.n == other.n
            and self.x == other.x
            and self.z == other.z
        )

    def __hash__(self) -> int:
        return hash((self.n, self.x, self.z))

    def __repr__(self) -> str:
        return f"PauliString({self.letters()!r})"


@dataclass(frozen=True)
class CliffordGateSpec:
    """One primitive operation: gate, preparation, measurement or raw Bell pair."""

    kind: str
    targets: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} expects {arity} targets, got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("gate targets must be distinct")


def anticommutes(p: PauliString, observable: PauliString) -> int:
    """Return 1 iff the two strings anticommute.

    Two Pauli strings anticommute iff they differ by a non-identity letter at
    an odd number of positions, i.e. the symplectic product is odd.
    """
    if p.n != observable.n:
        raise ValueError("length mismatch")
    return ((p.x & observable.z).bit_count() + (p.z & observable.x).bit_count()) & 1


def conjugate_through(gate: CliffordGateSpec, p: PauliString) -> PauliString:
    """Propagate an error frame through a unitary Clifford gate (U p U+ up to sign)."""
    if gate.kind not in UNITARY_KINDS:
        raise ValueError(f"cannot conjugate through non-unitary kind {gate.kind!r}")
    for q in gate.targets:
        if q >= p.n:
            raise ValueError("gate target outside qubit range")
    x, z = p.x, p.z
    if gate.kind == "CNOT":
        c, t = gate.targets
        # X on control copies onto target; Z on target copies onto control.
        if x >> c & 1:
            x ^= 1 << t
        if z >> t & 1:
            z ^= 1 << c
    elif gate.kind == "CZ":
        a, b = gate.targets
        if x >> a & 1:
            z ^= 1 << b
        if x >> b & 1:
            z ^= 1 << a
    elif gate.kind == "H":
        (q,) = gate.targets
        xb, zb = x >> q & 1, z >> q & 1
        x ^= (xb ^ zb) << q
        z ^= (xb ^ zb) << q
    elif gate.kind == "SWAP":
        a, b = gate.targets
        xa, xb_ = x >> a & 1, x >> b & 1
        za, zb = z >> a & 1, z >> b & 1
        x ^= ((xa ^ xb_) << a) | ((xa ^ xb_) << b)
        z ^= ((za ^ zb) << a) | ((za ^ zb) << b)
    return PauliString(p.n, x, z)


class SparseErrorDist:
    """Sparse probability distribution over Pauli error frames.

    Invariants: stored probabilities are > 0, and the stored mass plus
    ``truncated_mass`` accounts for all probability (equal to 1 after any
    normalization, to within accumulated floating point error).
    """

    __slots__ = ("n", "entries", "truncated_mass")

    def __init__(
        self,
        n: int,
        entries: dict[PauliString, float] | None = None,
        truncated_mass: float = 0.0,
    ):
        self.n = n
        self.entries = dict(entries) if entries else {}
        self.truncated_mass = truncated_mass

    @classmethod
    def identity(cls, n: int) -> "SparseErrorDist":
        return cls(n, {PauliString(n): 1.0})

    def total_mass(self) -> float:
        return sum(self.entries.values())

    def items_sorted(self) -> list[tuple[PauliString, float]]:
        """Entries in deterministic order (lexicographic, I < X < Y < Z per qubit)."""
        return sorted(self.entries.items(), key=lambda kv: kv[0].sort_key())

    def copy(self) -> "SparseErrorDist":
        return SparseErrorDist(self.n, self.entries, self.truncated_mass)


def dist_apply_gate(dist: SparseErrorDist, gate: CliffordGateSpec) -> SparseErrorDist:
    """Conjugate every frame through a unitary gate; probabilities unchanged."""
    out: dict[PauliString, float] = {}
    for key, p in dist.entries.items():
        out[conjugate_through(gate, key)] = p
    return SparseErrorDist(dist.n, out, dist.truncated_mass)


def dist_mix_channel(
    dist: SparseErrorDist,
    channel: Iterable[tuple[PauliString, float]],
    tol: float = 1e-12,
) -> SparseErrorDist:
    """Convolve the distribution with a Pauli channel (must sum to 1)."""
    channel = list(channel)
    csum = sum(p for _, p in channel)
    if abs(csum - 1.0) > tol:
        raise ValueError(f"channel probabilities sum to {csum!r}, expected 1")
    out: dict[PauliString, float] = {}
    for key, p in dist.entries.items():
        for elem, q in channel:
            if q == 0.0:
                continue
            composed = key.compose(elem)
            out[composed] = out.get(composed, 0.0) + p * q
    return SparseErrorDist(dist.n, out, dist.truncated_mass)


def dist_condition(
    dist: SparseErrorDist,
    observable: PauliString,
    flip_prob: float = 0.0,
    kept_outcome: int = 0,
) -> tuple[SparseErrorDist, float]:
    """Post-select on a parity measurement of ``observable``.

    Outcome bit 0 is the unflipped (no-error) parity; a frame anticommuting
    with the observable flips it, and the physical readout additionally flips
    with probability ``flip_prob``.  Keeps the branch reporting
    ``kept_outcome``, renormalizes, and returns the pre-normalization branch
    mass as the success probability.
    """
    out: dict[PauliString, float] = {}
    success = 0.0
    for key, p in dist.entries.items():
        bit = anticommutes(key, observable)
        keep = (1.0 - flip_prob) if bit == kept_outcome else flip_prob
        if keep > 0.0:
            mass = p * keep
            out[key] = out.get(key, 0.0) + mass
            success += mass
    if success <= 0.0:
        raise DegeneratePostSelectionError(
            "post-selected branch has zero probability"
        )
    scale = 1.0 / success
    for key in out:
        out[key] *= scale
    # Conditioning renormalizes, so truncation bookkeeping restarts.
    return SparseErrorDist(dist.n, out, 0.0), success


def dist_truncate(dist: SparseErrorDist, eps: float) -> SparseErrorDist:
    """Drop entries below ``eps``, moving their mass into ``truncated_mass``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return dist.copy()
    out: dict[PauliString, float] = {}
    dropped = 0.0
    for key, p in dist.entries.items():
        if p < eps:
            dropped += p
        else:
            out[key] = p
    return SparseErrorDist(dist.n, out, dist.truncated_mass + dropped)
