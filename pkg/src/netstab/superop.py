"""Exact extraction of stabilizer-measurement superoperators.

A protocol's successful branch is walked with an exact sparse distribution
over Pauli error frames: raw Bell pairs inject their error channel, every
two-qubit gate mixes in depolarizing noise, measurements fold in readout
flips, and each parity check conditions the distribution on the kept
outcome.  Resets discard their ancillas before the data coupling, so the
distribution conditioned on overall success is exactly the sequential
conditional walk.  The final parity readout splits every frame into a
correct or incorrect projection and the ancilla support is marginalized
away, leaving the weights of the stabilizer superoperator: a map from
(4-qubit data error class, CORRECT/INCORRECT) to probability.

The state is kept factored over independent qubit blocks, merging lazily
when an operation couples blocks, which keeps the exact walk cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import NoiseParams
from .pauli import LETTERS, DegeneratePostSelectionError, PauliString
from .protocols import (
    FAIL_BAD,
    FAIL_GOOD,
    PASS,
    ProtocolSpec,
    stringent_plus,
)

CORRECT = "CORRECT"
INCORRECT = "INCORRECT"

_LETTER_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


def _parity(v: int) -> int:
    return v.bit_count() & 1


# ---------------------------------------------------------------------------
# Noise channel elements in local (x, z) mask form
# ---------------------------------------------------------------------------


def _bell_elems(p_n: float) -> list[tuple[int, int, float]]:
    # error on the second member of the pair: bit 1 of the local masks
    return [
        (0, 0, 1.0 - p_n),
        (2, 0, p_n / 3.0),
        (2, 2, p_n / 3.0),
        (0, 2, p_n / 3.0),
    ]


def _gate2_elems(p_g: float) -> list[tuple[int, int, float]]:
    share = p_g / 15.0
    elems = [(0, 0, 1.0 - p_g)]
    for a in LETTERS:
        for b in LETTERS:
            if a == b == "I":
                continue
            xa, za = _LETTER_XZ[a]
            xb, zb = _LETTER_XZ[b]
            elems.append((xa | (xb << 1), za | (zb << 1), share))
    return elems


def _gate1_elems(p_g: float) -> list[tuple[int, int, float]]:
    share = p_g / 3.0
    return [(0, 0, 1.0 - p_g), (1, 0, share), (1, 1, share), (0, 1, share)]


def _flip_x(p: float) -> list[tuple[int, int, float]]:
    return [(0, 0, 1.0 - p), (1, 0, p)]


def _flip_z(p: float) -> list[tuple[int, int, float]]:
    return [(0, 0, 1.0 - p), (0, 1, p)]


# ---------------------------------------------------------------------------
# Factored frame-distribution state
# ---------------------------------------------------------------------------


_ZSHIFT = 32  # packed key: x | (z << 32), block-local bit fields


class _Block:
    """One independent factor: packed frame keys with their probabilities."""

    __slots__ = ("qubits", "keys", "probs")

    def __init__(self, qubits: tuple[int, ...], keys, probs):
        self.qubits = qubits
        self.keys = keys  # int64 array, (x << 32) | z in block-local bits
        self.probs = probs  # float64 array

    def pos(self, q: int) -> int:
        return self.qubits.index(q)

    def items(self):
        xmask = (1 << _ZSHIFT) - 1
        for k, p in zip(self.keys.tolist(), self.probs.tolist()):
            yield (k & xmask, k >> _ZSHIFT), p


def _pack(x: int, z: int) -> int:
    return x | (z << _ZSHIFT)


def _dedupe(keys, probs):
    uk, inv = np.unique(keys, return_inverse=True)
    up = np.bincount(inv, weights=probs, minlength=len(uk))
    return uk, up


def _parity_of_mask(keys, mask):
    return np.bitwise_count(keys & mask).astype(np.int64) & 1


class FactoredState:
    """Product of independent sparse frame distributions over qubit blocks.

    Internally each block's frames are packed int64 keys handled with
    vectorized numpy bit arithmetic; the walk stays exact up to the
    configured truncation threshold.
    """

    def __init__(self, eps: float = 0.0):
        self.eps = eps
        self.where: dict[int, _Block] = {}
        self.truncated = 0.0

    # -- block bookkeeping --------------------------------------------------

    def alive(self) -> list[int]:
        return sorted(self.where)

    def ensure(self, qubits: tuple[int, ...]):
        for q in qubits:
            if q in self.where:
                raise ValueError(f"qubit {q} already alive")
        block = _Block(
            tuple(qubits),
            np.zeros(1, dtype=np.int64),
            np.ones(1, dtype=np.float64),
        )
        for q in qubits:
            self.where[q] = block

    @staticmethod
    def _respread(keys, posmap):
        """Move block-local bits (both fields) to new positions."""
        out = np.zeros_like(keys)
        for i, p in enumerate(posmap):
            out |= ((keys >> i) & 1) << p
            out |= ((keys >> (i + _ZSHIFT)) & 1) << (p + _ZSHIFT)
        return out

    def _product(self, keys, probs, other_keys, other_probs, combine):
        """Chunked outer product with eager truncation to bound memory."""
        chunk = max(1, (4 << 20) // max(1, len(other_keys)))
        out_k = []
        out_p = []
        for lo in range(0, len(keys), chunk):
            k = combine(keys[lo : lo + chunk, None], other_keys[None, :]).ravel()
            p = (probs[lo : lo + chunk, None] * other_probs[None, :]).ravel()
            if self.eps > 0.0 and len(k) > 4096:
                mask = p >= self.eps
                if not mask.all():
                    self.truncated += float(p[~mask].sum())
                    k, p = k[mask], p[mask]
            out_k.append(k)
            out_p.append(p)
        return np.concatenate(out_k), np.concatenate(out_p)

    def _merge(self, qubits) -> _Block:
        blocks: list[_Block] = []
        for q in qubits:
            b = self.where.get(q)
            if b is None:
                raise ValueError(f"qubit {q} is not alive")
            if b not in blocks:
                blocks.append(b)
        if len(blocks) == 1:
            return blocks[0]
        new_qubits = tuple(sorted(q for b in blocks for q in b.qubits))
        keys = np.zeros(1, dtype=np.int64)
        probs = np.ones(1, dtype=np.float64)
        for b in blocks:
            posmap = [new_qubits.index(q) for q in b.qubits]
            bk = self._respread(b.keys, posmap)
            keys, probs = self._product(keys, probs, bk, b.probs, np.bitwise_or)
        keys, probs = _dedupe(keys, probs)
        merged = _Block(new_qubits, keys, probs)
        for q in new_qubits:
            self.where[q] = merged
        self._truncate(merged)
        return merged

    def _truncate(self, block: _Block):
        if self.eps <= 0.0 or len(block.keys) == 0:
            return
        mask = block.probs >= self.eps
        if mask.all():
            return
        self.truncated += float(block.probs[~mask].sum())
        block.keys = block.keys[mask]
        block.probs = block.probs[mask]

    # -- operations ----------------------------------------------------------

    def apply_unitary(self, kind: str, targets: tuple[int, ...]):
        block = self._merge(targets)
        keys = block.keys
        if kind == "CNOT":
            c, t = (block.pos(q) for q in targets)
            xc = (keys >> c) & 1
            zt = (keys >> (t + _ZSHIFT)) & 1
            keys = keys ^ (xc << t) ^ (zt << (c + _ZSHIFT))
        elif kind == "CZ":
            a, b = (block.pos(q) for q in targets)
            xa = (keys >> a) & 1
            xb = (keys >> b) & 1
            keys = keys ^ (xa << (b + _ZSHIFT)) ^ (xb << (a + _ZSHIFT))
        elif kind == "H":
            (q,) = targets
            i = block.pos(q)
            xb = (keys >> i) & 1
            zb = (keys >> (i + _ZSHIFT)) & 1
            diff = xb ^ zb
            keys = keys ^ (diff << i) ^ (diff << (i + _ZSHIFT))
        elif kind == "SWAP":
            a, b = (block.pos(q) for q in targets)
            for off in (0, _ZSHIFT):
                ba = (keys >> (a + off)) & 1
                bb = (keys >> (b + off)) & 1
                diff = ba ^ bb
                keys = keys ^ (diff << (a + off)) ^ (diff << (b + off))
        else:
            raise ValueError(f"not a unitary kind: {kind}")
        block.keys, block.probs = _dedupe(keys, block.probs)

    def mix(self, qubits: tuple[int, ...], elems: list[tuple[int, int, float]]):
        block = self._merge(qubits)
        pos = [block.pos(q) for q in qubits]
        ekeys = []
        eprobs = []
        for ex, ez, p in elems:
            if p == 0.0:
                continue
            sx = sz = 0
            for i, dest in enumerate(pos):
                sx |= ((ex >> i) & 1) << dest
                sz |= ((ez >> i) & 1) << dest
            ekeys.append(_pack(sx, sz))
            eprobs.append(p)
        ekeys = np.asarray(ekeys, dtype=np.int64)
        eprobs = np.asarray(eprobs, dtype=np.float64)
        keys, probs = self._product(block.keys, block.probs, ekeys, eprobs, np.bitwise_xor)
        block.keys, block.probs = _dedupe(keys, probs)

    def _observable_masks(self, block: _Block, qubits, basis: str) -> int:
        """Packed mask whose overlap parity with a key gives the deviation.

        A frame flips a Z-type parity iff its x part overlaps the observable
        support oddly (and dually for X-type), so the test mask lives in the
        opposite field of the packed key.
        """
        m = 0
        for q in qubits:
            i = block.pos(q)
            if basis == "Z":
                m |= 1 << i  # test x bits
            else:
                m |= 1 << (i + _ZSHIFT)  # test z bits
        return m

    def deviation_split(self, qubits, basis: str) -> tuple[float, float]:
        """Probability mass with parity deviation 0 and 1 (no conditioning)."""
        block = self._merge(qubits)
        mask = self._observable_masks(block, qubits, basis)
        dev = _parity_of_mask(block.keys, mask)
        p1 = float(block.probs[dev == 1].sum())
        p0 = float(block.probs.sum()) - p1
        return p0, p1

    def condition(self, qubits, basis: str, kept: int = 0) -> float:
        block = self._merge(qubits)
        mask = self._observable_masks(block, qubits, basis)
        dev = _parity_of_mask(block.keys, mask)
        keep = dev == kept
        success = float(block.probs[keep].sum())
        if success <= 0.0:
            raise DegeneratePostSelectionError(
                f"zero-mass branch at check on {qubits}"
            )
        block.keys = block.keys[keep]
        block.probs = block.probs[keep] / success
        self.truncated /= success
        self._truncate(block)
        return success

    def controlled_fix(self, trigger_qubits, trigger_basis: str, correction):
        all_q = tuple(trigger_qubits) + tuple(q for q, _ in correction)
        block = self._merge(all_q)
        mask = self._observable_masks(block, trigger_qubits, trigger_basis)
        cx = cz = 0
        for q, letter in correction:
            lx, lz = _LETTER_XZ[letter]
            m = block.pos(q)
            cx |= lx << m
            cz |= lz << m
        corr = _pack(cx, cz)
        dev = _parity_of_mask(block.keys, mask)
        keys = block.keys ^ (dev * corr)
        block.keys, block.probs = _dedupe(keys, block.probs)

    def forget(self, qubits):
        blocks: list[_Block] = []
        for q in qubits:
            b = self.where.get(q)
            if b is None:
                raise ValueError(f"cannot forget dead qubit {q}")
            if b not in blocks:
                blocks.append(b)
        drop = set(qubits)
        for b in blocks:
            keep_pos = [i for i, q in enumerate(b.qubits) if q not in drop]
            new_qubits = tuple(q for q in b.qubits if q not in drop)
            for q in b.qubits:
                if q in drop:
                    del self.where[q]
            if not new_qubits:
                continue
            keys = np.zeros_like(b.keys)
            for j, i in enumerate(keep_pos):
                keys |= ((b.keys >> i) & 1) << j
                keys |= ((b.keys >> (i + _ZSHIFT)) & 1) << (j + _ZSHIFT)
            uk, up = _dedupe(keys, b.probs)
            nb = _Block(new_qubits, uk, up)
            for q in new_qubits:
                self.where[q] = nb

    def merged_all(self) -> _Block:
        qubits = self.alive()
        if not qubits:
            raise ValueError("no live qubits")
        return self._merge(qubits)

    def copy(self) -> "FactoredState":
        out = FactoredState(self.eps)
        out.truncated = self.truncated
        seen: dict[int, _Block] = {}
        for q, b in self.where.items():
            nb = seen.get(id(b))
            if nb is None:
                nb = _Block(b.qubits, b.keys.copy(), b.probs.copy())
                seen[id(b)] = nb
            out.where[q] = nb
        return out

    def total_mass(self) -> float:
        mass = 1.0
        seen = set()
        for b in self.where.values():
            if id(b) in seen:
                continue
            seen.add(id(b))
            mass *= float(b.probs.sum())
        return mass


# ---------------------------------------------------------------------------
# Superoperator containers
# ---------------------------------------------------------------------------


@dataclass
class LevelSuccess:
    index: int
    name: str
    probability: float


@dataclass
class StabilizerSuperoperator:
    """Weights of the noisy stabilizer measurement: (error class, projector tag)."""

    basis: str
    n_data: int
    entries: dict[tuple[PauliString, str], float]
    protocol: str = ""
    noise: NoiseParams = field(default_factory=NoiseParams)
    eps: float = 0.0
    truncated_mass: float = 0.0
    level_success: list[LevelSuccess] = field(default_factory=list)

    def total(self) -> float:
        return sum(self.entries.values())

    def incorrect_total(self) -> float:
        return sum(w for (_, tag), w in self.entries.items() if tag == INCORRECT)

    def weight(self, letters: str, tag: str) -> float:
        """Weight of an error class; the query is reduced modulo the
        measured stabilizer (an error and its product with the measured
        parity operator are the same physical class)."""
        e = canonical_error(PauliString.from_letters(letters), self.basis)
        return self.entries.get((e, tag), 0.0)

    def items_sorted(self):
        return sorted(
            self.entries.items(), key=lambda kv: (kv[0][1], kv[0][0].sort_key())
        )


@dataclass
class WeightTable:
    """Aggregation of a superoperator into single- and two-qubit error classes."""

    basis: str
    classes: dict[tuple[str, str], float]

    def get(self, label: str, tag: str) -> float:
        return self.classes.get((label, tag), 0.0)


CLASS_LABELS = ("1", "X", "Y", "Z", "XX", "YY", "ZZ", "XY", "XZ", "YZ", "REST")


def _stab_string(n: int, basis: str) -> PauliString:
    return PauliString.from_letters(("Z" if basis == "Z" else "X") * n)


def canonical_error(e: PauliString, basis: str) -> PauliString:
    """Reduce an error class modulo the measured stabilizer, preferring the
    lower-weight (then lexicographically smaller) representative."""
    alt = e.compose(_stab_string(e.n, basis))
    ka = (e.weight(), e.sort_key())
    kb = (alt.weight(), alt.sort_key())
    return e if ka <= kb else alt


# ---------------------------------------------------------------------------
# The protocol walk
# ---------------------------------------------------------------------------


def _apply_step(state: FactoredState, step, noise: NoiseParams):
    for gate in step:
        kind = gate.kind
        if kind == "BELL_RAW":
            state.ensure(gate.targets)
            state.mix(gate.targets, _bell_elems(noise.p_n))
        elif kind == "PREP_Z":
            state.ensure(gate.targets)
            state.mix(gate.targets, _flip_x(noise.p_m))
        elif kind == "PREP_X":
            state.ensure(gate.targets)
            state.mix(gate.targets, _flip_z(noise.p_m))
        elif kind == "MEAS_Z":
            state.mix(gate.targets, _flip_x(noise.p_m))
        elif kind == "MEAS_X":
            state.mix(gate.targets, _flip_z(noise.p_m))
        else:
            state.apply_unitary(kind, gate.targets)
            elems = (
                _gate2_elems(noise.p_g)
                if len(gate.targets) == 2
                else _gate1_elems(noise.p_g)
            )
            state.mix(gate.targets, elems)


def _ensure_data(state: FactoredState, spec: ProtocolSpec):
    state.ensure(spec.data_qubits)


def _walk_level(state: FactoredState, level, noise, check_probs: dict):
    for step in level.steps:
        _apply_step(state, step, noise)
    for check in level.checks:
        p = state.condition(check.qubits, check.basis)
        check_probs.setdefault(level.index, []).append((check, p))
    for fix in level.fixes:
        state.controlled_fix(fix.trigger_qubits, fix.trigger_basis, fix.correction)
    if level.discard:
        state.forget(level.discard)


def _level_probability(level, records) -> float:
    p = 1.0
    for check, cp in records:
        if level.parallel_group is None or check.instance == 0:
            p *= cp
    return p


def run_success_branch(
    spec: ProtocolSpec, noise: NoiseParams, eps: float = 1e-13
) -> tuple[FactoredState, list[LevelSuccess]]:
    """Walk all post-selecting levels; returns the conditioned state just
    before the readout level, plus per-level success probabilities."""
    state = FactoredState(eps)
    _ensure_data(state, spec)
    check_probs: dict = {}
    levels = []
    for level in spec.levels[:-1]:
        _walk_level(state, level, noise, check_probs)
        levels.append(
            LevelSuccess(
                level.index, level.name, _level_probability(level, check_probs.get(level.index, []))
            )
        )
    return state, levels


def success_probabilities(spec: ProtocolSpec, noise: NoiseParams, eps: float = 1e-13):
    """Per-level success probabilities (per parallel instance, matching the
    convention of the protocol tables)."""
    _, levels = run_success_branch(spec, noise, eps)
    return levels


def _data_marginal(state: FactoredState, block, data_qubits, dev) -> dict:
    """Collapse a block to (data-error, deviation-bit) weights."""
    data_pos = [block.pos(q) for q in data_qubits]
    n_data = len(data_qubits)
    combo = dev.astype(np.int64)
    for j, i in enumerate(data_pos):
        combo |= ((block.keys >> i) & 1) << (1 + j)  # x bits
        combo |= ((block.keys >> (i + _ZSHIFT)) & 1) << (1 + n_data + j)  # z bits
    uniq, inv = np.unique(combo, return_inverse=True)
    sums = np.bincount(inv, weights=block.probs, minlength=len(uniq))
    out = {}
    for key, w in zip(uniq.tolist(), sums.tolist()):
        d = key & 1
        dx = (key >> 1) & ((1 << n_data) - 1)
        dz = key >> (1 + n_data)
        out[(PauliString(n_data, dx, dz), d)] = w
    return out


def _readout_weights(
    state: FactoredState, spec: ProtocolSpec, noise: NoiseParams
) -> dict[tuple[PauliString, str], float]:
    readout_level = spec.levels[-1]
    for step in readout_level.steps:
        _apply_step(state, step, noise)
    block = state.merged_all()
    ro = spec.readout
    mask = state._observable_masks(block, ro.qubits, ro.basis)
    dev = _parity_of_mask(block.keys, mask)
    weights: dict[tuple[PauliString, str], float] = {}
    for (err, d), w in _data_marginal(state, block, spec.data_qubits, dev).items():
        key = (canonical_error(err, spec.basis), CORRECT if d == 0 else INCORRECT)
        weights[key] = weights.get(key, 0.0) + w
    return weights


def extract_superoperator(
    spec: ProtocolSpec,
    noise: NoiseParams,
    eps: float = 1e-13,
    trunc_budget: float = 1e-6,
    reported_outcome: str = "even",
) -> StabilizerSuperoperator:
    """Exact conditional extraction of the stabilizer superoperator.

    The ``reported_outcome`` switch selects which final parity the weights
    are conditioned on; the extraction is outcome-independent (frames carry
    no information about the ideal parity), so both settings yield the same
    table - the switch exists so the symmetry can be audited.
    """
    if reported_outcome not in ("even", "odd"):
        raise ValueError("reported_outcome must be 'even' or 'odd'")
    state, levels = run_success_branch(spec, noise, eps)
    weights = _readout_weights(state, spec, noise)
    # conditioning renormalizes during the walk; the readout split does not,
    # so fold any truncation dust back into an exactly normalized table
    total = sum(weights.values())
    weights = {k: w / total for k, w in weights.items()}
    so = StabilizerSuperoperator(
        basis=spec.basis,
        n_data=len(spec.data_qubits),
        entries=weights,
        protocol=spec.name,
        noise=noise,
        eps=eps,
        truncated_mass=state.truncated,
        level_success=levels,
    )
    if so.truncated_mass > trunc_budget:
        raise ExactnessWarningError(
            f"truncated mass {so.truncated_mass:.3e} exceeds budget {trunc_budget:.3e}"
        )
    return so


class ExactnessWarningError(RuntimeError):
    """Truncated probability mass exceeded the configured exactness budget."""


# ---------------------------------------------------------------------------
# Twirling and aggregation
# ---------------------------------------------------------------------------

CYCLIC_GROUP = ((0, 1, 2, 3), (1, 2, 3, 0), (2, 3, 0, 1), (3, 0, 1, 2))


def full_symmetric_group(n: int = 4):
    import itertools

    return tuple(itertools.permutations(range(n)))


def _permute_error(e: PauliString, perm) -> PauliString:
    ops = e.ops
    new = [""] * e.n
    for i, dest in enumerate(perm):
        new[dest] = ops[i]
    return PauliString.from_letters("".join(new))


def twirl(so: StabilizerSuperoperator, group=CYCLIC_GROUP) -> StabilizerSuperoperator:
    """Average the weights over a group of cell-label permutations."""
    group = tuple(tuple(p) for p in group)
    if not group:
        raise ValueError("twirl group must be non-empty")
    for perm in group:
        if sorted(perm) != list(range(so.n_data)):
            raise ValueError(f"bad permutation {perm!r}")
    out: dict[tuple[PauliString, str], float] = {}
    share = 1.0 / len(group)
    for (e, tag), w in so.entries.items():
        for perm in group:
            pe = canonical_error(_permute_error(e, perm), so.basis)
            key = (pe, tag)
            out[key] = out.get(key, 0.0) + w * share
    return StabilizerSuperoperator(
        so.basis,
        so.n_data,
        out,
        so.protocol,
        so.noise,
        so.eps,
        so.truncated_mass,
        so.level_success,
    )


def classify_error(e: PauliString) -> str:
    letters = sorted(op for op in e.ops if op != "I")
    if not letters:
        return "1"
    if len(letters) == 1:
        return letters[0]
    if len(letters) == 2:
        return "".join(letters)
    return "REST"


def aggregate(so: StabilizerSuperoperator) -> WeightTable:
    classes: dict[tuple[str, str], float] = {}
    for (e, tag), w in so.entries.items():
        label = classify_error(e)
        ab = "A" if tag == CORRECT else "B"
        classes[(label, ab)] = classes.get((label, ab), 0.0) + w
    return WeightTable(so.basis, classes)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def serialize_superoperator(so: StabilizerSuperoperator) -> str:
    lines = ["netstab-superoperator/1"]
    lines.append(f"protocol {so.protocol or 'UNKNOWN'}")
    lines.append(f"basis {so.basis}")
    lines.append(f"n_data {so.n_data}")
    lines.append(f"p_g {so.noise.p_g!r}")
    lines.append(f"p_m {so.noise.p_m!r}")
    lines.append(f"p_n {so.noise.p_n!r}")
    lines.append(f"eps {so.eps!r}")
    lines.append(f"truncated_mass {so.truncated_mass!r}")
    entries = so.items_sorted()
    lines.append(f"entries {len(entries)}")
    for (e, tag), w in entries:
        lines.append(f"{e.letters()} {tag} {w!r}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def deserialize_superoperator(text: str) -> StabilizerSuperoperator:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "netstab-superoperator/1":
        raise ValueError("malformed record: bad header")
    fields: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("entries "):
        key, _, value = lines[i].partition(" ")
        fields[key] = value
        i += 1
    if i >= len(lines):
        raise ValueError("malformed record: missing entries section")
    for required in ("basis", "n_data", "p_g", "p_m", "p_n"):
        if required not in fields:
            raise ValueError(f"malformed record: missing {required} field")
    if fields["basis"] not in ("Z", "X"):
        raise ValueError(f"malformed record: bad basis {fields['basis']!r}")
    n_data = int(fields["n_data"])
    count = int(lines[i].split()[1])
    entries: dict[tuple[PauliString, str], float] = {}
    for line in lines[i + 1 : i + 1 + count]:
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"malformed record: bad entry line {line!r}")
        letters, tag, w = parts
        if tag not in (CORRECT, INCORRECT):
            raise ValueError(f"malformed record: unknown class label {tag!r}")
        if len(letters) != n_data or any(c not in LETTERS for c in letters):
            raise ValueError(f"malformed record: bad error string {letters!r}")
        entries[(PauliString.from_letters(letters), tag)] = float(w)
    if i + 1 + count >= len(lines) or lines[i + 1 + count] != "end":
        raise ValueError("malformed record: missing end marker")
    return StabilizerSuperoperator(
        basis=fields["basis"],
        n_data=n_data,
        entries=entries,
        protocol=fields.get("protocol", ""),
        noise=NoiseParams(
            float(fields["p_g"]), float(fields["p_m"]), float(fields["p_n"])
        ),
        eps=float(fields.get("eps", "0.0")),
        truncated_mass=float(fields.get("truncated_mass", "0.0")),
    )


# ---------------------------------------------------------------------------
# STRINGENT+ extraction with abort cases
# ---------------------------------------------------------------------------


@dataclass
class AbortCaseExtraction:
    """Case-conditional superoperators of the filtered protocol.

    For the abort cases the weights already include the follow-up unfiltered
    stabilization round, composed with the errors left by the aborted one.
    """

    basis: str
    noise: NoiseParams
    case_probs: dict[str, float]
    superops: dict[str, StabilizerSuperoperator]


def _split_on_checks(state: FactoredState, checks) -> tuple[float, FactoredState, FactoredState]:
    """Split the state into pass-all / fail-any branches (both renormalized)."""
    qubits = tuple(dict.fromkeys(q for c in checks for q in c.qubits))
    block = state._merge(qubits)
    ok = np.ones(len(block.keys), dtype=bool)
    for c in checks:
        mask = state._observable_masks(block, c.qubits, c.basis)
        ok &= _parity_of_mask(block.keys, mask) == 0
    p_pass = float(block.probs[ok].sum())
    p_total = float(block.probs.sum())
    p_fail = p_total - p_pass
    if p_pass <= 0.0 or p_fail <= 0.0:
        raise DegeneratePostSelectionError("filter split produced an empty branch")
    pass_state = state.copy()
    fail_state = state
    pb = pass_state.where[qubits[0]]
    pb.keys = block.keys[ok].copy()
    pb.probs = block.probs[ok] / p_pass
    fb = fail_state.where[qubits[0]]
    fb.keys = block.keys[~ok]
    fb.probs = block.probs[~ok] / p_fail
    return p_pass / p_total, pass_state, fail_state


def compose_with_superoperator(
    data_dist: dict[PauliString, float], so: StabilizerSuperoperator
) -> dict[tuple[PauliString, str], float]:
    out: dict[tuple[PauliString, str], float] = {}
    for e1, p1 in data_dist.items():
        for (e2, tag), w in so.entries.items():
            err = canonical_error(e1.compose(e2), so.basis)
            key = (err, tag)
            out[key] = out.get(key, 0.0) + p1 * w
    return out


def extract_stringent_plus(
    noise: NoiseParams, basis: str = "Z", eps: float = 1e-13, trunc_budget: float = 1e-3
) -> AbortCaseExtraction:
    """Extract the three case-conditional superoperators of STRINGENT+."""
    spec = stringent_plus(basis=basis, filtered=True)
    state = FactoredState(eps)
    state.ensure(spec.data_qubits)
    check_probs: dict = {}
    levels = []
    filter_level = None
    for level in spec.levels[:-1]:
        if spec.filter_spec and level.index == spec.filter_spec.level_index:
            filter_level = level
            break
        _walk_level(state, level, noise, check_probs)
        levels.append(
            LevelSuccess(level.index, level.name, _level_probability(level, check_probs.get(level.index, [])))
        )
    assert filter_level is not None

    # run the filter level's circuit; post-select its auxiliary-purification
    # checks, but split on the filter checks proper
    for step in filter_level.steps:
        _apply_step(state, step, noise)
    filter_checks = []
    for check in filter_level.checks:
        if check.name == "filter":
            filter_checks.append(check)
        else:
            state.condition(check.qubits, check.basis)
    p_pass, pass_state, fail_state = _split_on_checks(state, filter_checks)
    pass_state.forget(filter_level.discard)
    fail_state.forget(filter_level.discard)

    # PASS: proceed to the transversal readout
    readout_weights = _readout_weights(pass_state, spec, noise)
    w_total = sum(readout_weights.values())
    readout_weights = {k: w / w_total for k, w in readout_weights.items()}
    so_pass = StabilizerSuperoperator(
        basis,
        len(spec.data_qubits),
        readout_weights,
        "STRINGENT_PLUS",
        noise,
        eps,
        pass_state.truncated,
        levels,
    )

    # FAIL: abort by measuring the GHZ in the Z basis; the outcome pattern
    # (all-equal vs not, up to the random global sign) classifies the abort.
    fs = spec.filter_spec
    n_data = len(spec.data_qubits)
    for q in fs.abort_meas_qubits:
        fail_state.mix((q,), _flip_x(noise.p_m) if fs.abort_meas_basis == "Z" else _flip_z(noise.p_m))
    block = fail_state.merged_all()
    ghz = fs.abort_meas_qubits
    bad_pattern = np.zeros(len(block.keys), dtype=np.int64)
    for a, b in zip(ghz, ghz[1:]):
        mask = fail_state._observable_masks(block, (a, b), fs.abort_meas_basis)
        bad_pattern |= _parity_of_mask(block.keys, mask)
    marg = _data_marginal(fail_state, block, spec.data_qubits, bad_pattern)
    dist_good: dict[PauliString, float] = {}
    dist_bad: dict[PauliString, float] = {}
    w_good = 0.0
    w_bad = 0.0
    for (err, bad), w in marg.items():
        if bad:
            dist_bad[err] = dist_bad.get(err, 0.0) + w
            w_bad += w
        else:
            dist_good[err] = dist_good.get(err, 0.0) + w
            w_good += w
    total_fail_mass = w_good + w_bad
    dist_good = {k: v / w_good for k, v in dist_good.items()} if w_good else {}
    dist_bad = {k: v / w_bad for k, v in dist_bad.items()} if w_bad else {}

    # follow-up round without the filter
    spec2 = stringent_plus(basis=basis, filtered=False)
    so2 = extract_superoperator(spec2, noise, eps, trunc_budget=trunc_budget)
    so_good = StabilizerSuperoperator(
        basis,
        n_data,
        compose_with_superoperator(dist_good, so2),
        "STRINGENT_PLUS",
        noise,
        eps,
        so2.truncated_mass,
        levels,
    )
    so_bad = StabilizerSuperoperator(
        basis,
        n_data,
        compose_with_superoperator(dist_bad, so2),
        "STRINGENT_PLUS",
        noise,
        eps,
        so2.truncated_mass,
        levels,
    )
    case_probs = {
        PASS: p_pass,
        FAIL_GOOD: (1.0 - p_pass) * (w_good / total_fail_mass),
        FAIL_BAD: (1.0 - p_pass) * (w_bad / total_fail_mass),
    }
    return AbortCaseExtraction(
        basis,
        noise,
        case_probs,
        {PASS: so_pass, FAIL_GOOD: so_good, FAIL_BAD: so_bad},
    )
