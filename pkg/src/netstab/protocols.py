"""Leveled protocol programs with failure-reset semantics.

A protocol is an ordered list of levels.  Each level is a fixed-duration
block of time steps; a step is a set of primitive operations executed
simultaneously in distinct cells (operations within one cell are strictly
sequential, so every primitive costs one step).  Most levels end in parity
checks: post-selections on measurement-outcome products whose failure resets
the protocol to the level's failure-reset level (FRL).  The final level is
the stabilizer readout itself and reports the parity outcome instead of
post-selecting.

Built-in protocols: EXPEDIENT, STRINGENT, STRINGENT_PLUS and MONOLITHIC.
The networked protocols run on four cells (A, B, C, D) holding one data
qubit plus three (four for STRINGENT_PLUS) ancillas each.  Gate sequences
for the built-ins are reconstructed from the level names and step budgets
and are calibrated against the published per-level success probabilities
(see ``netstab.cli`` ``calibrate``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from .pauli import CliffordGateSpec

PROTOCOL_NAMES = ("EXPEDIENT", "STRINGENT", "STRINGENT_PLUS", "MONOLITHIC")

# Abort-filter classical outcomes (STRINGENT_PLUS only)
PASS = "PASS"
FAIL_GOOD = "FAIL_GOOD"
FAIL_BAD = "FAIL_BAD"
ABORT_CASES = (PASS, FAIL_GOOD, FAIL_BAD)


@dataclass(frozen=True)
class AbortFilterOutcome:
    """Classical flag produced by the STRINGENT_PLUS post-coupling filter."""

    case: str

    def __post_init__(self):
        if self.case not in ABORT_CASES:
            raise ValueError(f"unknown abort case {self.case!r}")


@dataclass(frozen=True)
class Check:
    """Post-selected parity: product of same-basis measurement outcomes on
    ``qubits`` must report the no-error value."""

    name: str
    qubits: tuple[int, ...]
    basis: str  # "Z" or "X"
    instance: int = 0

    def __post_init__(self):
        if self.basis not in ("Z", "X"):
            raise ValueError("check basis must be Z or X")


@dataclass(frozen=True)
class ControlledFix:
    """Outcome-conditioned Pauli correction applied after a level's checks.

    When the measured parity of ``trigger_qubits`` (in ``trigger_basis``)
    deviates from its reference value, the correction Pauli given by
    ``correction`` (qubit, letter) pairs is folded into the error frame.
    Needed where a fusion measurement has a random collapse branch that the
    protocol repairs with a classically controlled Pauli.
    """

    trigger_qubits: tuple[int, ...]
    trigger_basis: str
    correction: tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class ProtocolLevel:
    index: int
    name: str
    t_steps: int
    frl: int | None
    steps: tuple[tuple[CliffordGateSpec, ...], ...]
    checks: tuple[Check, ...] = ()
    fixes: tuple[ControlledFix, ...] = ()
    discard: tuple[int, ...] = ()
    parallel_group: int | None = None


@dataclass(frozen=True)
class ReadoutSpec:
    """Deviation observable of the final parity readout."""

    qubits: tuple[int, ...]
    basis: str


@dataclass(frozen=True)
class FilterSpec:
    """STRINGENT_PLUS post-coupling filter: the checks of the filter level,
    and the abort measurement used to classify failures."""

    level_index: int
    abort_meas_qubits: tuple[int, ...]
    abort_meas_basis: str


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    basis: str  # "Z" or "X": which stabilizer type is measured
    cells: int
    ancillas_per_cell: int
    n_qubits: int
    data_qubits: tuple[int, ...]
    levels: tuple[ProtocolLevel, ...]
    readout: ReadoutSpec
    filter_spec: FilterSpec | None = None


class CellRegistry:
    """Qubit index layout: cell-major, slot 0 is the data qubit."""

    def __init__(self, cells: int = 4, ancillas: int = 3):
        self.cells = cells
        self.ancillas = ancillas
        self.n_qubits = cells * (1 + ancillas)

    def data(self, cell: int) -> int:
        return cell * (1 + self.ancillas)

    def anc(self, cell: int, slot: int) -> int:
        if not 1 <= slot <= self.ancillas:
            raise ValueError("ancilla slot out of range")
        return cell * (1 + self.ancillas) + slot


def _g(kind: str, *targets: int) -> CliffordGateSpec:
    return CliffordGateSpec(kind, tuple(targets))


def _bell_step(*pairs: tuple[int, int]) -> tuple[CliffordGateSpec, ...]:
    return tuple(_g("BELL_RAW", a, b) for a, b in pairs)


def _bxor_step(*pairs: tuple[tuple[int, int], tuple[int, int]]) -> tuple[CliffordGateSpec, ...]:
    """Bilateral CNOT between aligned halves of (control pair, target pair)."""
    gates = []
    for ctrl, tgt in pairs:
        gates.append(_g("CNOT", ctrl[0], tgt[0]))
        gates.append(_g("CNOT", ctrl[1], tgt[1]))
    return tuple(gates)


def _meas_step(basis: str, *qubits: int) -> tuple[CliffordGateSpec, ...]:
    kind = "MEAS_Z" if basis == "Z" else "MEAS_X"
    return tuple(_g(kind, q) for q in qubits)


def _pair_checks(name: str, basis: str, *pairs: tuple[int, int]) -> tuple[Check, ...]:
    return tuple(
        Check(name, pair, basis, instance=i) for i, pair in enumerate(pairs)
    )


# ---------------------------------------------------------------------------
# Built-in level fragments (shared by EXPEDIENT and STRINGENT)
# ---------------------------------------------------------------------------


def _double_selection_round1(idx, name, frl, kept, s1, s2, group=None):
    """Create a raw pair and check it with two further raw pairs.

    The kept pair is checked in the Z basis through the first sacrificial
    pair; the second sacrificial pair guards the first against the errors it
    would silently back-propagate, via an X-basis parity.
    """
    steps = (
        _bell_step(*kept),
        _bell_step(*s1),
        _bell_step(*s2),
        _bxor_step(*((k, a) for k, a in zip(kept, s1))),
        _bxor_step(*((b, a) for b, a in zip(s2, s1))),
        _meas_step("Z", *(q for p in s1 for q in p)),
        _meas_step("X", *(q for p in s2 for q in p)),
    )
    checks = _pair_checks(f"{name}/keep", "Z", *s1) + _pair_checks(
        f"{name}/guard", "X", *s2
    )
    discard = tuple(q for p in s1 + s2 for q in p)
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, (), discard, group)


def _double_selection_round2(idx, name, frl, kept, s1, s2, group=None, flavor="dual"):
    """Second double-selection round on an existing kept pair.

    ``flavor="dual"``: complementary round that checks the kept pair's phase
    errors (X-basis parity through the first sacrificial pair, Z-basis
    guard).  ``flavor="same"``: repeat of the round-one orientation.
    """
    if flavor == "same":
        steps = (
            _bell_step(*s1),
            _bell_step(*s2),
            _bxor_step(*((k, a) for k, a in zip(kept, s1))),
            _bxor_step(*((b, a) for b, a in zip(s2, s1))),
            _meas_step("Z", *(q for p in s1 for q in p)),
            _meas_step("X", *(q for p in s2 for q in p)),
        )
        checks = _pair_checks(f"{name}/keep", "Z", *s1) + _pair_checks(
            f"{name}/guard", "X", *s2
        )
    elif flavor == "dual":
        steps = (
            _bell_step(*s1),
            _bell_step(*s2),
            _bxor_step(*((a, k) for a, k in zip(s1, kept))),
            _bxor_step(*((a, b) for a, b in zip(s1, s2))),
            _meas_step("X", *(q for p in s1 for q in p)),
            _meas_step("Z", *(q for p in s2 for q in p)),
        )
        checks = _pair_checks(f"{name}/keep", "X", *s1) + _pair_checks(
            f"{name}/guard", "Z", *s2
        )
    else:
        raise ValueError(f"unknown round-two flavor {flavor!r}")
    discard = tuple(q for p in s1 + s2 for q in p)
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, (), discard, group)


def _single_selection_round1(idx, name, frl, kept, sac, group=None, basis="Z"):
    """Create a raw kept pair and purify it once against a raw sacrificial."""
    if basis == "Z":
        bxor = _bxor_step(*((k, s) for k, s in zip(kept, sac)))
    else:
        bxor = _bxor_step(*((s, k) for s, k in zip(sac, kept)))
    steps = (
        _bell_step(*kept),
        _bell_step(*sac),
        bxor,
        _meas_step(basis, *(q for p in sac for q in p)),
    )
    checks = _pair_checks(f"{name}/sel", basis, *sac)
    discard = tuple(q for p in sac for q in p)
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, (), discard, group)


def _single_selection_round2(idx, name, frl, kept, sac, group=None, basis="X"):
    """Purify the kept pair once more in the complementary basis."""
    if basis == "Z":
        bxor = _bxor_step(*((k, s) for k, s in zip(kept, sac)))
    else:
        bxor = _bxor_step(*((s, k) for s, k in zip(sac, kept)))
    steps = (
        _bell_step(*sac),
        bxor,
        _meas_step(basis, *(q for p in sac for q in p)),
    )
    checks = _pair_checks(f"{name}/sel", basis, *sac)
    discard = tuple(q for p in sac for q in p)
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, (), discard, group)


def _fusion_fragment(carriers, links):
    """Fuse the carrier cycle into a GHZ state, measuring out the link pairs.

    carriers: tuple of 4 carrier qubits (one per cell, A B C D order).
    links: ((lA, lC), (lB, lD)) link pairs bridging the two carrier pairs.
    Returns (steps, checks, fixes, discard).
    """
    (l_ac, l_bd) = links
    k_a, k_b, k_c, k_d = carriers
    link_of = {0: l_ac[0], 1: l_bd[0], 2: l_ac[1], 3: l_bd[1]}
    steps = (
        tuple(_g("CNOT", carriers[c], link_of[c]) for c in range(4)),
        _meas_step("Z", *(link_of[c] for c in range(4))),
    )
    checks = (
        Check("fuse/global", tuple(link_of[c] for c in range(4)), "Z"),
    )
    # Within the accepted branch the two pair parities deviate together; the
    # protocol repairs the deviating collapse branch with X on two carriers.
    fixes = (
        ControlledFix(l_ac, "Z", ((k_c, "X"), (k_d, "X"))),
    )
    discard = tuple(link_of[c] for c in range(4))
    return steps, checks, fixes, discard


def _ghz_pair_check_fragment(name, ghz, aux_pairs, cells_of_pairs):
    """Check GHZ pair parities with auxiliary entangled pairs.

    aux_pairs: pairs of aux qubits; cells_of_pairs: matching cell indices of
    the GHZ qubits each pair checks.
    """
    gates = []
    meas = []
    checks = []
    for i, (aux, cells) in enumerate(zip(aux_pairs, cells_of_pairs)):
        for g_cell, a in zip(cells, aux):
            gates.append(_g("CNOT", ghz[g_cell], a))
        meas.extend(aux)
        checks.append(Check(name, tuple(aux), "Z", instance=i))
    steps = (tuple(gates), _meas_step("Z", *meas))
    discard = tuple(meas)
    return steps, tuple(checks), discard


def _guarded_fusion_level(idx, name, frl, carriers, links, guards, prelude=(), prechecks=(), prediscard=()):
    """Fuse the carrier cycle through the purified links, with raw guard
    pairs protecting the link measurements against silent back-propagation.

    guards: ((gA, gC), (gB, gD)) raw pairs on the same diagonals as links.
    ``prelude`` steps (with ``prechecks``) may prepare the guards.
    """
    (l_ac, l_bd) = links
    (g_ac, g_bd) = guards
    link_of = {0: l_ac[0], 1: l_bd[0], 2: l_ac[1], 3: l_bd[1]}
    guard_of = {0: g_ac[0], 1: g_bd[0], 2: g_ac[1], 3: g_bd[1]}
    steps = prelude + (
        _bell_step(g_ac, g_bd) if not prelude else (),
        tuple(_g("CNOT", carriers[c], link_of[c]) for c in range(4)),
        tuple(_g("CNOT", guard_of[c], link_of[c]) for c in range(4)),
        _meas_step("Z", *(link_of[c] for c in range(4))),
        _meas_step("X", *(guard_of[c] for c in range(4))),
    )
    steps = tuple(step for step in steps if step)
    checks = prechecks + (
        Check(f"{name}/global", tuple(link_of[c] for c in range(4)), "Z"),
        Check(f"{name}/guard", g_ac, "X", instance=0),
        Check(f"{name}/guard", g_bd, "X", instance=1),
    )
    fixes = (ControlledFix(l_ac, "Z", ((carriers[2], "X"), (carriers[3], "X"))),)
    discard = tuple(
        dict.fromkeys(
            prediscard
            + tuple(link_of[c] for c in range(4))
            + tuple(guard_of[c] for c in range(4))
        )
    )
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, fixes, discard)


def _guarded_ghz_check_level(idx, name, frl, carriers, links, guards, prelude=(), prechecks=(), prediscard=()):
    """Verify the GHZ pair parities through the purified links, guarding
    each link with a raw pair on the same diagonal."""
    (l_ac, l_bd) = links
    (g_ac, g_bd) = guards
    link_of = {0: l_ac[0], 1: l_bd[0], 2: l_ac[1], 3: l_bd[1]}
    guard_of = {0: g_ac[0], 1: g_bd[0], 2: g_ac[1], 3: g_bd[1]}
    steps = prelude + (
        _bell_step(g_ac, g_bd) if not prelude else (),
        tuple(_g("CNOT", carriers[c], link_of[c]) for c in range(4)),
        tuple(_g("CNOT", guard_of[c], link_of[c]) for c in range(4)),
        _meas_step("Z", *(link_of[c] for c in range(4))),
        _meas_step("X", *(guard_of[c] for c in range(4))),
    )
    steps = tuple(step for step in steps if step)
    checks = prechecks + (
        Check(f"{name}/keep", l_ac, "Z", instance=0),
        Check(f"{name}/keep", l_bd, "Z", instance=1),
        Check(f"{name}/guard", g_ac, "X", instance=0),
        Check(f"{name}/guard", g_bd, "X", instance=1),
    )
    discard = tuple(
        dict.fromkeys(
            prediscard
            + tuple(link_of[c] for c in range(4))
            + tuple(guard_of[c] for c in range(4))
        )
    )
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, (), discard)


def _readout_level(idx, data, ghz, basis, t=2, name="Measure stabilizer"):
    if basis == "Z":
        couple = tuple(_g("CZ", d, g) for d, g in zip(data, ghz))
        meas = _meas_step("X", *ghz)
        readout = ReadoutSpec(tuple(ghz), "X")
    else:
        couple = tuple(_g("CNOT", g, d) for d, g in zip(data, ghz))
        meas = _meas_step("X", *ghz)
        readout = ReadoutSpec(tuple(ghz), "X")
    steps = (couple, meas)
    level = ProtocolLevel(idx, name, len(steps), None, steps, (), (), tuple(ghz))
    return level, readout


# ---------------------------------------------------------------------------
# Built-in protocols
# ---------------------------------------------------------------------------


def expedient(basis: str = "Z") -> ProtocolSpec:
    """The EXPEDIENT protocol: 9 levels, 33 minimum time steps.

    Phase 1 purifies Bell pairs across A-B and C-D with two rounds of double
    selection; phase 2 makes purified A-C and B-D link pairs with two rounds
    of single selection, fuses everything into a 4-cell GHZ and verifies it
    with a second round of link pairs; phase 3 couples the GHZ to the data
    qubits and measures it out transversally.
    """
    reg = CellRegistry(4, 3)
    A, B, C, D = range(4)
    data = tuple(reg.data(c) for c in range(4))
    k = tuple(reg.anc(c, 1) for c in range(4))
    l = tuple(reg.anc(c, 2) for c in range(4))
    s = tuple(reg.anc(c, 3) for c in range(4))

    kept = ((k[A], k[B]), (k[C], k[D]))
    s1 = ((l[A], l[B]), (l[C], l[D]))
    s2 = ((s[A], s[B]), (s[C], s[D]))
    link_kept = ((l[A], l[C]), (l[B], l[D]))
    link_sac = ((s[A], s[C]), (s[B], s[D]))

    levels = []
    levels.append(
        _double_selection_round1(1, "Round one Bell pair production", 1, kept, s1, s2, group=1)
    )
    levels.append(
        _double_selection_round2(2, "Round two Bell pair production", 1, kept, s1, s2, group=1)
    )
    levels.append(
        _single_selection_round1(3, "Round one single selection", 3, link_kept, link_sac, group=2)
    )
    levels.append(
        _single_selection_round2(4, "Round two single selection", 3, link_kept, link_sac, group=2)
    )
    fsteps, fchecks, ffixes, fdiscard = _fusion_fragment(k, link_kept)
    levels.append(ProtocolLevel(5, "Make GHZ", len(fsteps), 1, fsteps, fchecks, ffixes, fdiscard))
    levels.append(
        _single_selection_round1(6, "Round one single selection", 6, link_kept, link_sac, group=3)
    )
    levels.append(
        _single_selection_round2(7, "Round two single selection", 7, link_kept, link_sac, group=3)
    )
    csteps, cchecks, cdiscard = _ghz_pair_check_fragment(
        "check-ghz", k, link_kept, ((A, C), (B, D))
    )
    levels.append(ProtocolLevel(8, "Check GHZ", len(csteps), 1, csteps, cchecks, (), cdiscard))
    ro_level, readout = _readout_level(9, data, k, basis)
    levels.append(ro_level)
    return ProtocolSpec(
        "EXPEDIENT", basis, 4, 3, reg.n_qubits, data, tuple(levels), readout
    )


def _big_check_level(idx, name, frl, kept, p_pair, r_pair, flavor="dual", group=None):
    """Double-selection-style check of the kept pair, first tier purified.

    ``flavor="dual"``: phase-error check of the kept pair (X parity through
    the purified pair, raw guard measured in Z).
    ``flavor="same"``: bit-flip check (round-one orientation, purified first
    tier, raw guard measured in X).
    """
    if flavor == "dual":
        steps = (
            _bell_step(*r_pair),
            _bxor_step(*((p_, k_) for p_, k_ in zip(p_pair, kept))),
            _bxor_step(*((p_, r_) for p_, r_ in zip(p_pair, r_pair))),
            _meas_step("X", *(q for p in p_pair for q in p)),
            _meas_step("Z", *(q for p in r_pair for q in p)),
        )
        checks = _pair_checks(f"{name}/keep", "X", *p_pair) + _pair_checks(
            f"{name}/guard", "Z", *r_pair
        )
    elif flavor == "same":
        steps = (
            _bell_step(*r_pair),
            _bxor_step(*((k_, p_) for k_, p_ in zip(kept, p_pair))),
            _bxor_step(*((r_, p_) for r_, p_ in zip(r_pair, p_pair))),
            _meas_step("Z", *(q for p in p_pair for q in p)),
            _meas_step("X", *(q for p in r_pair for q in p)),
        )
        checks = _pair_checks(f"{name}/keep", "Z", *p_pair) + _pair_checks(
            f"{name}/guard", "X", *r_pair
        )
    else:
        raise ValueError(f"unknown big-check flavor {flavor!r}")
    discard = tuple(q for p in p_pair + r_pair for q in p)
    return ProtocolLevel(idx, name, len(steps), frl, steps, checks, (), discard, group)


def stringent(basis: str = "Z") -> ProtocolSpec:
    """The STRINGENT protocol: 15 levels, 63 minimum time steps.

    As EXPEDIENT, but the kept Bell pairs are re-checked twice more through
    freshly purified auxiliary pairs, and both GHZ construction steps carry
    additional raw-pair verifications.
    """
    reg = CellRegistry(4, 3)
    A, B, C, D = range(4)
    data = tuple(reg.data(c) for c in range(4))
    k = tuple(reg.anc(c, 1) for c in range(4))
    l = tuple(reg.anc(c, 2) for c in range(4))
    s = tuple(reg.anc(c, 3) for c in range(4))

    kept = ((k[A], k[B]), (k[C], k[D]))
    aux = ((l[A], l[B]), (l[C], l[D]))
    sac = ((s[A], s[B]), (s[C], s[D]))
    link_kept = ((l[A], l[C]), (l[B], l[D]))
    link_sac = ((s[A], s[C]), (s[B], s[D]))
    raw_ac_bd = ((s[A], s[C]), (s[B], s[D]))
    raw_ab_cd = ((s[A], s[B]), (s[C], s[D]))

    levels = []
    levels.append(_double_selection_round1(1, "Bell pair production", 1, kept, aux, sac, group=1))
    levels.append(_double_selection_round2(2, "Bell pair check 1", 1, kept, aux, sac, group=1))
    levels.append(_single_selection_round1(3, "Round one single selection", 3, aux, sac, group=1))
    levels.append(_single_selection_round2(4, "Round two single selection", 3, aux, sac, group=1))
    levels.append(_big_check_level(5, "Bell pair check 2", 1, kept, aux, sac, flavor="same", group=1))
    levels.append(_single_selection_round1(6, "Round one single selection", 6, aux, sac, group=1))
    levels.append(_single_selection_round2(7, "Round two single selection", 6, aux, sac, group=1))
    levels.append(_big_check_level(8, "Bell pair check 3", 1, kept, aux, sac, flavor="dual", group=1))
    levels.append(
        _single_selection_round1(9, "Round one single selection", 9, link_kept, link_sac, group=2)
    )
    levels.append(
        _single_selection_round2(10, "Round two single selection", 9, link_kept, link_sac, group=2)
    )
    levels.append(_guarded_fusion_level(11, "Make GHZ", 1, k, link_kept, raw_ac_bd))
    levels.append(
        _single_selection_round1(12, "Round one single selection", 12, link_kept, link_sac, group=3)
    )
    levels.append(
        _single_selection_round2(13, "Round two single selection", 12, link_kept, link_sac, group=3)
    )
    levels.append(_guarded_ghz_check_level(14, "Check GHZ", 1, k, link_kept, raw_ac_bd))
    ro_level, readout = _readout_level(15, data, k, basis)
    levels.append(ro_level)
    return ProtocolSpec(
        "STRINGENT", basis, 4, 3, reg.n_qubits, data, tuple(levels), readout
    )


def monolithic(basis: str = "Z") -> ProtocolSpec:
    """Single-cell comparison circuit: one shared ancilla, four sequential
    CNOTs to the data qubits, one noisy measurement.  Network noise has no
    meaning here; initialization carries the measurement infidelity."""
    n = 5
    data = (0, 1, 2, 3)
    anc = 4
    if basis == "Z":
        steps = (
            (_g("PREP_Z", anc),),
            (_g("CNOT", 0, anc),),
            (_g("CNOT", 1, anc),),
            (_g("CNOT", 2, anc),),
            (_g("CNOT", 3, anc),),
            (_g("MEAS_Z", anc),),
        )
        readout = ReadoutSpec((anc,), "Z")
    else:
        steps = (
            (_g("PREP_X", anc),),
            (_g("CNOT", anc, 0),),
            (_g("CNOT", anc, 1),),
            (_g("CNOT", anc, 2),),
            (_g("CNOT", anc, 3),),
            (_g("MEAS_X", anc),),
        )
        readout = ReadoutSpec((anc,), "X")
    level = ProtocolLevel(1, "Measure stabilizer", len(steps), None, steps, (), (), (anc,))
    return ProtocolSpec("MONOLITHIC", basis, 1, 1, n, data, (level,), readout)


def stringent_plus(basis: str = "Z", filtered: bool = True) -> ProtocolSpec:
    """Five-qubits-per-cell STRINGENT variant.

    Raw Bell pairs consumed by checks are replaced by purify-on-creation
    pairs built with the extra ancilla, single-selection rounds are upgraded
    to double selection, and the readout phase gains a post-coupling filter:
    on filter failure the GHZ is measured out in the Z basis and the round is
    aborted, yielding a classical three-way flag.  ``filtered=False`` builds
    the follow-up round that runs without the filter.
    """
    reg = CellRegistry(4, 4)
    A, B, C, D = range(4)
    data = tuple(reg.data(c) for c in range(4))
    k = tuple(reg.anc(c, 1) for c in range(4))
    l = tuple(reg.anc(c, 2) for c in range(4))
    s = tuple(reg.anc(c, 3) for c in range(4))
    e = tuple(reg.anc(c, 4) for c in range(4))  # the extra ancilla tier

    kept = ((k[A], k[B]), (k[C], k[D]))
    aux = ((l[A], l[B]), (l[C], l[D]))
    sac = ((s[A], s[B]), (s[C], s[D]))
    extra = ((e[A], e[B]), (e[C], e[D]))
    link_kept = ((l[A], l[C]), (l[B], l[D]))
    link_sac = ((s[A], s[C]), (s[B], s[D]))
    link_extra = ((e[A], e[C]), (e[B], e[D]))
    raw_ac_bd = ((s[A], s[C]), (s[B], s[D]))
    raw_ab_cd = ((s[A], s[B]), (s[C], s[D]))

    def purified_raw(pair_set, sac_set, tag="purify-raw"):
        """Steps creating 'raw' pairs that are purified once on creation."""
        return (
            _bell_step(*pair_set),
            _bell_step(*sac_set),
            _bxor_step(*((p_, s_) for p_, s_ in zip(pair_set, sac_set))),
            _meas_step("Z", *(q for p in sac_set for q in p)),
        ), _pair_checks(tag, "Z", *sac_set), tuple(q for p in sac_set for q in p)

    levels = []
    levels.append(_double_selection_round1(1, "Bell pair production", 1, kept, aux, sac, group=1))
    levels.append(_double_selection_round2(2, "Bell pair check 1", 1, kept, aux, sac, group=1))
    # Auxiliary pair production upgraded to two rounds of double selection.
    levels.append(_double_selection_round1(3, "Round one double selection", 3, aux, sac, extra, group=2))
    levels.append(_double_selection_round2(4, "Round two double selection", 3, aux, sac, extra, group=2))
    def guarded_big_check(idx, nm, flavor, grp):
        """Kept-pair check with the raw guard upgraded to a purified raw."""
        pr_steps, pr_checks, pr_discard = purified_raw(sac, extra)
        chk = _big_check_level(idx, nm, 1, kept, aux, sac, flavor=flavor, group=grp)
        steps = pr_steps + chk.steps[1:]  # replace the guard's raw creation
        return replace(
            chk,
            steps=steps,
            t_steps=len(steps),
            checks=pr_checks + chk.checks,
            discard=tuple(dict.fromkeys(pr_discard + chk.discard)),
        )

    levels.append(guarded_big_check(5, "Bell pair check 2", "same", 10))
    levels.append(_double_selection_round1(6, "Round one double selection", 6, aux, sac, extra, group=3))
    levels.append(_double_selection_round2(7, "Round two double selection", 6, aux, sac, extra, group=3))
    levels.append(guarded_big_check(8, "Bell pair check 3", "dual", 11))
    levels.append(
        _double_selection_round1(9, "Round one double selection", 9, link_kept, link_sac, link_extra, group=4)
    )
    levels.append(
        _double_selection_round2(10, "Round two double selection", 9, link_kept, link_sac, link_extra, group=4)
    )
    # Make GHZ / Check GHZ with purified-on-creation guards.
    pr_steps, pr_checks, pr_discard = purified_raw(raw_ac_bd, link_extra, tag="guard-purify")
    levels.append(
        _guarded_fusion_level(
            11, "Make GHZ", 1, k, link_kept, raw_ac_bd,
            prelude=pr_steps, prechecks=pr_checks, prediscard=pr_discard,
        )
    )
    levels.append(
        _double_selection_round1(12, "Round one double selection", 12, link_kept, link_sac, link_extra, group=5)
    )
    levels.append(
        _double_selection_round2(13, "Round two double selection", 12, link_kept, link_sac, link_extra, group=5)
    )
    pr_steps, pr_checks, pr_discard = purified_raw(raw_ac_bd, link_extra, tag="guard-purify")
    levels.append(
        _guarded_ghz_check_level(
            14, "Check GHZ", 1, k, link_kept, raw_ac_bd,
            prelude=pr_steps, prechecks=pr_checks, prediscard=pr_discard,
        )
    )

    filter_spec = None
    if filtered:
        # Prepare purified filter pairs, couple the GHZ to the data qubits,
        # then filter it before the transversal readout.
        prep_steps = (
            _bell_step(*link_kept),
            _bell_step(*link_sac),
            _bxor_step(*((p_, s_) for p_, s_ in zip(link_kept, link_sac))),
            _meas_step("Z", *(q for p in link_sac for q in p)),
        )
        levels.append(
            ProtocolLevel(
                15,
                "Filter pair preparation",
                len(prep_steps),
                15,
                prep_steps,
                _pair_checks("filter/purify", "Z", *link_sac),
                (),
                tuple(q for p in link_sac for q in p),
                None,
            )
        )
        if basis == "Z":
            couple = tuple(_g("CZ", d, g) for d, g in zip(data, k))
        else:
            couple = tuple(_g("CNOT", g, d) for d, g in zip(data, k))
        fsteps2, fchecks2, fdiscard2 = _ghz_pair_check_fragment(
            "filter", k, link_kept, ((A, C), (B, D))
        )
        fl_steps = (couple,) + fsteps2
        levels.append(
            ProtocolLevel(
                16,
                "Coupled filter",
                len(fl_steps),
                None,
                fl_steps,
                fchecks2,
                (),
                fdiscard2,
            )
        )
        filter_spec = FilterSpec(16, tuple(k), "Z")
        ro_steps = (_meas_step("X", *k),)
        ro_level = ProtocolLevel(17, "Measure stabilizer", 1, None, ro_steps, (), (), tuple(k))
        levels.append(ro_level)
        readout = ReadoutSpec(tuple(k), "X")
    else:
        ro_level, readout = _readout_level(15, data, k, basis)
        levels.append(ro_level)
    return ProtocolSpec(
        "STRINGENT_PLUS", basis, 4, 4, reg.n_qubits, data, tuple(levels), readout, filter_spec
    )


_BUILDERS = {
    "EXPEDIENT": expedient,
    "STRINGENT": stringent,
    "STRINGENT_PLUS": stringent_plus,
    "MONOLITHIC": monolithic,
}


def get_protocol(name: str, basis: str = "Z") -> ProtocolSpec:
    key = name.upper().replace("-", "_").replace("+", "_PLUS")
    if key == "STRINGENT_PLUS_PLUS":
        key = "STRINGENT_PLUS"
    if key not in _BUILDERS:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(_BUILDERS)}")
    return _BUILDERS[key](basis=basis)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(spec: ProtocolSpec) -> list[str]:
    """Check protocol invariants; returns a list of violations (empty if valid)."""
    errs: list[str] = []
    if spec.basis not in ("Z", "X"):
        errs.append(f"bad basis {spec.basis!r}")
    alive: set[int] = set(spec.data_qubits)
    measured: set[int] = set()
    for pos, level in enumerate(spec.levels):
        if level.t_steps != len(level.steps):
            errs.append(
                f"level {level.index}: declared t={level.t_steps} but {len(level.steps)} steps"
            )
        if level.frl is not None and not 1 <= level.frl <= level.index:
            errs.append(f"level {level.index}: frl {level.frl} out of range")
        if pos == len(spec.levels) - 1:
            if level.checks:
                errs.append("final level must not post-select")
        elif level.frl is None and spec.filter_spec is None:
            errs.append(f"level {level.index}: missing frl")
        for step in level.steps:
            cell_load: dict[int, int] = {}
            for gate in step:
                cells_hit = set()
                for q in gate.targets:
                    if not 0 <= q < spec.n_qubits:
                        errs.append(f"level {level.index}: qubit {q} out of range")
                        continue
                    cells_hit.add(q // (1 + spec.ancillas_per_cell))
                # operations within a cell are strictly sequential: each cell
                # hosts at most one primitive per time step
                for cell in cells_hit:
                    cell_load[cell] = cell_load.get(cell, 0) + 1
                    if cell_load[cell] > 1:
                        errs.append(
                            f"level {level.index}: cell {cell} hosts two operations in one step"
                        )
                if gate.kind in ("BELL_RAW", "PREP_Z", "PREP_X"):
                    for q in gate.targets:
                        if q in alive:
                            errs.append(
                                f"level {level.index}: qubit {q} re-created while alive"
                            )
                        alive.add(q)
                        measured.discard(q)
                elif gate.kind in ("MEAS_Z", "MEAS_X"):
                    for q in gate.targets:
                        if q not in alive:
                            errs.append(f"level {level.index}: measuring dead qubit {q}")
                        measured.add(q)
                else:
                    for q in gate.targets:
                        if q not in alive:
                            errs.append(f"level {level.index}: gate on dead qubit {q}")
                        if q in measured:
                            errs.append(
                                f"level {level.index}: gate on measured qubit {q}"
                            )
        for check in level.checks:
            for q in check.qubits:
                if q not in measured:
                    errs.append(
                        f"level {level.index}: check {check.name!r} on unmeasured qubit {q}"
                    )
        for q in level.discard:
            if q not in alive:
                errs.append(f"level {level.index}: discarding dead qubit {q}")
            alive.discard(q)
            measured.discard(q)
    for q in spec.readout.qubits:
        if q in alive:
            errs.append("readout qubits must be discarded by the final level")
    return errs


# ---------------------------------------------------------------------------
# Declarative serialization (user-defined protocol variants)
# ---------------------------------------------------------------------------


def to_declaration(spec: ProtocolSpec) -> dict:
    """Plain-data form of a protocol, suitable for JSON round-tripping."""
    return {
        "format": "netstab-protocol/1",
        "name": spec.name,
        "basis": spec.basis,
        "cells": spec.cells,
        "ancillas_per_cell": spec.ancillas_per_cell,
        "n_qubits": spec.n_qubits,
        "data_qubits": list(spec.data_qubits),
        "readout": {"qubits": list(spec.readout.qubits), "basis": spec.readout.basis},
        "filter": (
            None
            if spec.filter_spec is None
            else {
                "level_index": spec.filter_spec.level_index,
                "abort_meas_qubits": list(spec.filter_spec.abort_meas_qubits),
                "abort_meas_basis": spec.filter_spec.abort_meas_basis,
            }
        ),
        "levels": [
            {
                "index": lv.index,
                "name": lv.name,
                "t": lv.t_steps,
                "frl": lv.frl,
                "parallel_group": lv.parallel_group,
                "steps": [
                    [{"kind": g.kind, "targets": list(g.targets)} for g in step]
                    for step in lv.steps
                ],
                "checks": [
                    {
                        "name": c.name,
                        "qubits": list(c.qubits),
                        "basis": c.basis,
                        "instance": c.instance,
                    }
                    for c in lv.checks
                ],
                "fixes": [
                    {
                        "trigger_qubits": list(f.trigger_qubits),
                        "trigger_basis": f.trigger_basis,
                        "correction": [[q, p] for q, p in f.correction],
                    }
                    for f in lv.fixes
                ],
                "discard": list(lv.discard),
            }
            for lv in spec.levels
        ],
    }


def from_declaration(decl: dict) -> ProtocolSpec:
    if decl.get("format") != "netstab-protocol/1":
        raise ValueError("not a netstab protocol declaration")
    levels = []
    for lv in decl["levels"]:
        steps = tuple(
            tuple(CliffordGateSpec(g["kind"], tuple(g["targets"])) for g in step)
            for step in lv["steps"]
        )
        checks = tuple(
            Check(c["name"], tuple(c["qubits"]), c["basis"], c.get("instance", 0))
            for c in lv["checks"]
        )
        fixes = tuple(
            ControlledFix(
                tuple(f["trigger_qubits"]),
                f["trigger_basis"],
                tuple((q, p) for q, p in f["correction"]),
            )
            for f in lv["fixes"]
        )
        levels.append(
            ProtocolLevel(
                lv["index"],
                lv["name"],
                lv["t"],
                lv["frl"],
                steps,
                checks,
                fixes,
                tuple(lv["discard"]),
                lv.get("parallel_group"),
            )
        )
    fs = decl.get("filter")
    filter_spec = (
        FilterSpec(fs["level_index"], tuple(fs["abort_meas_qubits"]), fs["abort_meas_basis"])
        if fs
        else None
    )
    return ProtocolSpec(
        decl["name"],
        decl["basis"],
        decl["cells"],
        decl["ancillas_per_cell"],
        decl["n_qubits"],
        tuple(decl["data_qubits"]),
        tuple(levels),
        ReadoutSpec(tuple(decl["readout"]["qubits"]), decl["readout"]["basis"]),
        filter_spec,
    )


def dump_protocol(spec: ProtocolSpec) -> str:
    return json.dumps(to_declaration(spec), indent=1)


def load_protocol(text: str) -> ProtocolSpec:
    return from_declaration(json.loads(text))
