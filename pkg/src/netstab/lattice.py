"""Surface-code syndrome sampling and matching-based decoding.

Stabilizer measurements are drawn per plaquette/star and per round from an
extracted superoperator: each draw deposits a Pauli error class on the four
data qubits of that stabilizer and possibly flips the reported outcome
(incorrect projection).  Detection events are changes between consecutive
reported outcomes of the same stabilizer; a final noiseless readout round
closes every history.  Defects are paired by exact minimum-weight perfect
matching on a spacetime graph whose edge weights are the negative log
probabilities of the connecting error mechanisms, with optional
reweighting around flagged rounds (STRINGENT+ classical flags) and time-edge
merging across abandoned (non-reporting) stabilizer rounds.

The default geometry is the toric code with periodic boundaries (cleanest
homology test); a planar variant with boundary matching is also provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matching import MatchingError, min_weight_perfect_matching
from .pauli import PauliString
from .protocols import FAIL_BAD, FAIL_GOOD, PASS
from .superop import INCORRECT, StabilizerSuperoperator

GEOMETRIES = ("toric", "planar")


@dataclass(frozen=True)
class CodeLattice:
    """Distance-d surface code measured for T noisy rounds."""

    d: int
    rounds: int
    geometry: str = "toric"

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("distance must be >= 3")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")

    @property
    def n_qubits(self) -> int:
        return 2 * self.d * self.d

    def qubit(self, row: int, col: int, horizontal: bool) -> int:
        """Toric data-qubit index: two qubits per plaquette cell of a d x d
        grid; ``horizontal`` selects the edge along the row direction."""
        d = self.d
        return ((row % d) * d + (col % d)) * 2 + (1 if horizontal else 0)


@dataclass
class SyndromeHistory:
    """Detection events plus per-round flags and abandoned slots."""

    detection_events_z: list[tuple[int, int]]  # (plaquette index, round)
    detection_events_x: list[tuple[int, int]]
    flags: dict[tuple[str, int, int], str] = field(default_factory=dict)
    missing: set[tuple[str, int, int]] = field(default_factory=set)


@dataclass
class MatchingGraph:
    nodes: list[tuple[int, int]]
    edges: list[tuple[int, int, float]]
    paths: dict[tuple[int, int], list[int]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Toric code structure
#
# Data qubits sit on the edges of a d x d torus: qubit(r, c, horizontal)
# is the edge leaving vertex (r, c) rightwards (horizontal) or downwards
# (vertical).  The plaquette at (r, c) is bounded by the four edges
#   top    = (r, c, horizontal)
#   bottom = (r+1, c, horizontal)
#   left   = (r, c, vertical)
#   right  = (r, c+1, vertical)
# and carries the Z-type stabilizer; the star at vertex (r, c) touches the
# four edges incident to the vertex and carries the X-type stabilizer.
# ---------------------------------------------------------------------------


def plaquette_qubits(lat: CodeLattice, r: int, c: int) -> tuple[int, int, int, int]:
    return (
        lat.qubit(r, c, True),
        lat.qubit(r + 1, c, True),
        lat.qubit(r, c, False),
        lat.qubit(r, c + 1, False),
    )


def star_qubits(lat: CodeLattice, r: int, c: int) -> tuple[int, int, int, int]:
    return (
        lat.qubit(r, c, True),
        lat.qubit(r, c - 1, True),
        lat.qubit(r, c, False),
        lat.qubit(r - 1, c, False),
    )


def _stab_index(lat: CodeLattice, r: int, c: int) -> int:
    return (r % lat.d) * lat.d + (c % lat.d)


def _superop_tables(so: StabilizerSuperoperator):
    """Flatten a superoperator into sampling arrays.

    Returns (cumulative probabilities, x-masks, z-masks, flip bits) where the
    masks are 4-bit patterns over the stabilizer's data qubits.
    """
    entries = so.items_sorted()
    probs = np.array([w for _, w in entries], dtype=float)
    total = probs.sum()
    if total <= 0:
        raise ValueError("superoperator has no weight")
    probs /= total
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    xm = np.array([e.x for (e, _tag), _ in entries], dtype=np.int64)
    zm = np.array([e.z for (e, _tag), _ in entries], dtype=np.int64)
    flip = np.array(
        [1 if tag == INCORRECT else 0 for (_e, tag), _ in entries], dtype=np.int64
    )
    return cum, xm, zm, flip


def marginal_qubit_flip(so: StabilizerSuperoperator, flip_letters: tuple[str, ...]) -> float:
    """Probability that one specific data qubit of a draw receives an error
    with a letter from ``flip_letters`` (per-qubit deposit marginal)."""
    total = so.total()
    p = 0.0
    for (e, _tag), w in so.entries.items():
        ops = e.ops
        # average over the 4 positions: each stabilizer qubit is equivalent
        n_hit = sum(1 for op in ops if op in flip_letters)
        p += w * (n_hit / 4.0)
    return p / total


# ---------------------------------------------------------------------------
# Syndrome sampling
# ---------------------------------------------------------------------------


@dataclass
class AbortCaseSampler:
    """Sampling view of a STRINGENT+ extraction: case probabilities plus the
    per-case superoperator tables for each stabilizer type."""

    case_names: tuple[str, ...]
    case_cum: np.ndarray
    tables: dict[tuple[str, str], tuple]  # (kind, case) -> sampling table

    @classmethod
    def from_extraction(cls, extraction_z, extraction_x=None) -> "AbortCaseSampler":
        names = (PASS, FAIL_GOOD, FAIL_BAD)
        probs = np.array([extraction_z.case_probs[n] for n in names])
        probs = probs / probs.sum()
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        if extraction_x is None:
            extraction_x = extraction_z
        tables = {}
        for kind, ex in (("Z", extraction_z), ("X", extraction_x)):
            for n in names:
                tables[(kind, n)] = _superop_tables(ex.superops[n])
        return cls(names, cum, tables)


class SuperopSampler:
    """Precomputed sampling tables for one (so_z, so_x) pair."""

    def __init__(self, lat: CodeLattice, so_z, so_x, abort_sampler=None):
        d = lat.d
        self.lat = lat
        self.tz = _superop_tables(so_z)
        self.tx = _superop_tables(so_x)
        self.abort = abort_sampler
        self.plaq = np.array(
            [plaquette_qubits(lat, r, c) for r in range(d) for c in range(d)],
            dtype=np.int64,
        )
        self.star = np.array(
            [star_qubits(lat, r, c) for r in range(d) for c in range(d)],
            dtype=np.int64,
        )
        # 4-bit mask -> per-qubit flip pattern
        self.bits = np.array(
            [[(m >> b) & 1 for b in range(4)] for m in range(16)], dtype=np.int64
        )


def sample_syndrome_history(
    lat: CodeLattice,
    so_z: StabilizerSuperoperator,
    so_x: StabilizerSuperoperator,
    rng: np.random.Generator,
    abort_sampler: AbortCaseSampler | None = None,
    missing_rate: float = 0.0,
    initial_error: PauliString | None = None,
    sampler: SuperopSampler | None = None,
) -> tuple[SyndromeHistory, PauliString]:
    """Sample one spacetime syndrome history and the true accumulated error.

    Draws one superoperator entry per stabilizer per noisy round; outcomes
    within a round are synchronous (the whole sheet projects on the state
    left by earlier rounds, then this round's deposits land).  The final
    round is a noiseless readout of the true syndrome.  When
    ``abort_sampler`` is given, each stabilizer-round first draws an abort
    case: failures record a flag and sample from the case-conditional
    superoperator.  ``missing_rate`` abandons a stabilizer-round entirely
    (no draw, no report).
    """
    if lat.geometry != "toric":
        raise NotImplementedError("sampling is implemented for the toric geometry")
    d = lat.d
    n_stab = d * d
    n_q = lat.n_qubits
    T = lat.rounds
    if sampler is None:
        sampler = SuperopSampler(lat, so_z, so_x, abort_sampler)
    abort = abort_sampler if abort_sampler is not None else sampler.abort

    err_x = np.zeros(n_q, dtype=np.int64)  # X-component of the accumulated frame
    err_z = np.zeros(n_q, dtype=np.int64)
    if initial_error is not None:
        if initial_error.n != n_q:
            raise ValueError("initial error length mismatch")
        for q in range(n_q):
            err_x[q] = (initial_error.x >> q) & 1
            err_z[q] = (initial_error.z >> q) & 1

    outcomes_z = np.zeros((T + 1, n_stab), dtype=np.int64)
    outcomes_x = np.zeros((T + 1, n_stab), dtype=np.int64)
    flags: dict[tuple[str, int, int], str] = {}
    missing: set[tuple[str, int, int]] = set()

    # pre-draw every stabilizer-round: channel index per (round, kind, stab)
    u = rng.random((T, 2, n_stab))
    if abort is None:
        idx_z = np.searchsorted(sampler.tz[0], u[:, 0, :], side="right")
        idx_x = np.searchsorted(sampler.tx[0], u[:, 1, :], side="right")
        xm = np.empty((T, 2, n_stab), dtype=np.int64)
        zm = np.empty((T, 2, n_stab), dtype=np.int64)
        fl = np.empty((T, 2, n_stab), dtype=np.int64)
        for k, (tbl, idx) in enumerate(((sampler.tz, idx_z), (sampler.tx, idx_x))):
            ix = np.minimum(idx, len(tbl[0]) - 1)
            xm[:, k, :] = tbl[1][ix]
            zm[:, k, :] = tbl[2][ix]
            fl[:, k, :] = tbl[3][ix]
    else:
        uc = rng.random((T, 2, n_stab))
        ci = np.minimum(
            np.searchsorted(abort.case_cum, uc, side="right"),
            len(abort.case_names) - 1,
        )
        xm = np.empty((T, 2, n_stab), dtype=np.int64)
        zm = np.empty((T, 2, n_stab), dtype=np.int64)
        fl = np.empty((T, 2, n_stab), dtype=np.int64)
        for case_i, case in enumerate(abort.case_names):
            for k, kind in ((0, "Z"), (1, "X")):
                mask = np.zeros((T, 2, n_stab), dtype=bool)
                mask[:, k, :] = ci[:, k, :] == case_i
                if not mask.any():
                    continue
                tbl = abort.tables[(kind, case)]
                idx = np.minimum(
                    np.searchsorted(tbl[0], u[mask], side="right"), len(tbl[0]) - 1
                )
                xm[mask] = tbl[1][idx]
                zm[mask] = tbl[2][idx]
                fl[mask] = tbl[3][idx]
                if case != PASS:
                    for t, _k, s in zip(*np.nonzero(mask)):
                        flags[(kind, int(s), int(t))] = case
    if missing_rate > 0.0:
        um = rng.random((T, 2, n_stab))
        miss_mask = um < missing_rate
        for t, k, s in zip(*np.nonzero(miss_mask)):
            key = ("Z" if k == 0 else "X", int(s), int(t))
            missing.add(key)
            flags.pop(key, None)  # an abandoned round never ran
    else:
        miss_mask = None

    bits = sampler.bits
    for t in range(T):
        # synchronous sheet: this round's outcomes reflect the pre-round state
        par_z = (err_x[sampler.plaq].sum(axis=1)) & 1
        par_x = (err_z[sampler.star].sum(axis=1)) & 1
        outcomes_z[t, :] = par_z ^ fl[t, 0, :]
        outcomes_x[t, :] = par_x ^ fl[t, 1, :]
        if miss_mask is not None:
            outcomes_z[t, miss_mask[t, 0, :]] = -1
            outcomes_x[t, miss_mask[t, 1, :]] = -1
        for k, stabs in ((0, sampler.plaq), (1, sampler.star)):
            row_x = xm[t, k, :]
            row_z = zm[t, k, :]
            nz = np.nonzero(row_x | row_z)[0]
            for s in nz:
                if miss_mask is not None and miss_mask[t, k, s]:
                    continue
                qs = stabs[s]
                err_x[qs] ^= bits[row_x[s]]
                err_z[qs] ^= bits[row_z[s]]

    # final noiseless readout round
    outcomes_z[T, :] = (err_x[sampler.plaq].sum(axis=1)) & 1
    outcomes_x[T, :] = (err_z[sampler.star].sum(axis=1)) & 1

    def detections(out):
        events = []
        for s in range(n_stab):
            prev = 0
            for t in range(T + 1):
                v = out[t, s]
                if v < 0:
                    continue  # abandoned round reports nothing
                if v != prev:
                    events.append((s, t))
                prev = v
        return events

    history = SyndromeHistory(
        detection_events_z=detections(outcomes_z),
        detection_events_x=detections(outcomes_x),
        flags=flags,
        missing=missing,
    )
    xmask = zmask = 0
    for q in np.nonzero(err_x)[0]:
        xmask |= 1 << int(q)
    for q in np.nonzero(err_z)[0]:
        zmask |= 1 << int(q)
    return history, PauliString(n_q, xmask, zmask)


# ---------------------------------------------------------------------------
# Matching graph construction and decoding
# ---------------------------------------------------------------------------


def _wrap_delta(a: int, b: int, d: int) -> int:
    """Shortest signed displacement a -> b on a ring of size d."""
    raw = (b - a) % d
    return raw - d if raw > d // 2 else raw


@dataclass
class EdgeWeights:
    space: float
    time: float
    p_space: float
    p_time: float


def edge_weights_from_superop(
    so_detecting: StabilizerSuperoperator, so_other: StabilizerSuperoperator
) -> EdgeWeights:
    """Negative-log-probability weights for unit space and time edges.

    The space-edge probability is the per-round chance that a given data
    qubit accumulates an error anticommuting with the detecting stabilizer,
    combining the deposits of the two detecting-type draws and the two
    draws of the other stabilizer type that touch the qubit each round.
    """
    flip_letters = ("X", "Y") if so_detecting.basis == "Z" else ("Z", "Y")
    q_det = marginal_qubit_flip(so_detecting, flip_letters)
    q_oth = marginal_qubit_flip(so_other, flip_letters)
    p_space = 0.0
    for q in (q_det, q_det, q_oth, q_oth):
        p_space = p_space * (1.0 - q) + q * (1.0 - p_space)
    p_time = so_detecting.incorrect_total() / so_detecting.total()
    floor = 1e-12
    p_space = min(max(p_space, floor), 0.5)
    p_time = min(max(p_time, floor), 0.5)
    return EdgeWeights(
        space=-math.log(p_space), time=-math.log(p_time), p_space=p_space, p_time=p_time
    )


def build_matching_graph(
    events: list[tuple[int, int]],
    lat: CodeLattice,
    weights: EdgeWeights,
    kind: str = "Z",
    flags: dict | None = None,
    missing: set | None = None,
    favor_factor: float = 0.5,
    max_degree: int | None = None,
) -> MatchingGraph:
    """Defect graph with metric or flag-aware edge weights.

    Without flags or abandoned rounds the weight between two defects is the
    closed form  |dr| w_s + |dc| w_s + |dt| w_t  with toroidal wrapping in
    space.  With flags, unit edges incident to FAIL_BAD stabilizer-rounds
    are scaled by ``favor_factor`` and weights become shortest paths over
    the spacetime lattice graph; abandoned rounds merge their adjacent time
    edges (a non-reporting round contributes no detection information).

    ``max_degree`` keeps only each defect's cheapest neighbours once the
    defect count exceeds twice that degree; the complete graph is the
    default (exact).
    """
    d = lat.d
    n = len(events)
    edges: list[tuple[int, int, float]] = []
    paths: dict[tuple[int, int], list[int]] = {}
    flagged = set()
    for (k, s, t), case in (flags or {}).items():
        if k == kind and case == FAIL_BAD:
            # the round's own report may be an incorrect projection, and its
            # deposited errors first show in the next round's outcomes
            flagged.add((s, t))
            flagged.add((s, t + 1))
    missing_here = {(s, t) for (k, s, t) in (missing or set()) if k == kind}
    if not flagged and not missing_here:
        if n >= 2:
            arr = np.asarray(events, dtype=np.int64)
            r, c = arr[:, 0] // d, arr[:, 0] % d
            t = arr[:, 1]

            def ring(v):
                delta = np.abs(v[:, None] - v[None, :])
                return np.minimum(delta, d - delta)

            wmat = (ring(r) + ring(c)) * weights.space + np.abs(
                t[:, None] - t[None, :]
            ) * weights.time
            iu, ju = np.triu_indices(n, 1)
            if max_degree is not None and n > 2 * max_degree:
                keep = np.zeros((n, n), dtype=bool)
                order = np.argsort(wmat, axis=1)
                cols = order[:, 1 : max_degree + 1]
                rows = np.repeat(np.arange(n), max_degree)
                keep[rows, cols.ravel()] = True
                keep |= keep.T
                sel = keep[iu, ju]
                iu, ju = iu[sel], ju[sel]
            edges = list(zip(iu.tolist(), ju.tolist(), wmat[iu, ju].tolist()))
        return MatchingGraph(list(events), edges, paths)
    return _build_flag_aware_graph(
        events, lat, weights, flagged, missing_here, favor_factor
    )


def _build_flag_aware_graph(events, lat, weights, flagged, missing_here, favor_factor):
    """Dijkstra over the spacetime lattice with reweighted flagged regions."""
    import heapq

    d = lat.d
    T = lat.rounds
    n_stab = d * d

    def node_id(s, t):
        return t * n_stab + s

    # adjacency: space edges within a round, time edges between reporting
    # rounds of the same stabilizer (skipping abandoned rounds)
    adj: dict[int, list[tuple[int, float, int]]] = {}

    def add_edge(u, v, w, q=-1):
        adj.setdefault(u, []).append((v, w, q))
        adj.setdefault(v, []).append((u, w, q))

    for t in range(T + 1):
        for s in range(n_stab):
            if (s, t) in missing_here:
                continue
            r, c = divmod(s, d)
            for dr, dc in ((0, 1), (1, 0)):
                s2 = ((r + dr) % d) * d + ((c + dc) % d)
                if (s2, t) in missing_here:
                    continue
                w = weights.space
                if (s, t) in flagged or (s2, t) in flagged:
                    w *= favor_factor
                add_edge(node_id(s, t), node_id(s2, t), w)
    for s in range(n_stab):
        reporting = [t for t in range(T + 1) if (s, t) not in missing_here]
        for ta, tb in zip(reporting, reporting[1:]):
            gap = tb - ta
            if gap == 1:
                w = weights.time
            else:
                # merged time edge across abandoned rounds: combined flip odds
                p = weights.p_time
                pk = p
                for _ in range(gap - 1):
                    pk = pk * (1 - p) + p * (1 - pk)
                w = -math.log(min(max(pk, 1e-12), 0.5))
            if (s, ta) in flagged or (s, tb) in flagged:
                w *= favor_factor
            add_edge(node_id(s, ta), node_id(s, tb), w)

    targets = {node_id(s, t): i for i, (s, t) in enumerate(events)}
    n = len(events)
    edges = []
    paths = {}
    for i, (s, t) in enumerate(events):
        src = node_id(s, t)
        dist = {src: 0.0}
        prev: dict[int, int] = {}
        heap = [(0.0, src)]
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist.get(u, math.inf):
                continue
            for v, w, _q in adj.get(u, ()):  # noqa: B905
                alt = du + w
                if alt < dist.get(v, math.inf) - 1e-15:
                    dist[v] = alt
                    prev[v] = u
                    heapq.heappush(heap, (alt, v))
        for j in range(i + 1, n):
            s2, t2 = events[j]
            tgt = node_id(s2, t2)
            if tgt in dist:
                edges.append((i, j, dist[tgt]))
                node = tgt
                path = [node]
                while node != src:
                    node = prev[node]
                    path.append(node)
                paths[(i, j)] = path
    return MatchingGraph(list(events), edges, paths)


def mwpm_decode(graph: MatchingGraph) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching of the defect graph."""
    n = len(graph.nodes)
    if n == 0:
        return []
    if n % 2:
        raise MatchingError("odd defect count on a closed surface")
    return min_weight_perfect_matching(n, graph.edges)


def _toric_correction_path(lat: CodeLattice, kind: str, si: int, sj: int) -> list[int]:
    """Data qubits along a canonical minimal path between two stabilizers.

    For plaquettes (Z-type, correcting X errors) the path crosses plaquette
    boundaries; for stars it crosses star boundaries.  Rows first, then
    columns, wrapping the short way; ties broken toward positive direction.
    """
    d = lat.d
    ri, ci = divmod(si, d)
    rj, cj = divmod(sj, d)
    qubits = []
    dr = _wrap_delta(ri, rj, d)
    dc = _wrap_delta(ci, cj, d)
    r, c = ri, ci
    step = 1 if dr > 0 else -1
    for _ in range(abs(dr)):
        if kind == "Z":
            # crossing between plaquette (r, c) and (r+1, c) flips the
            # horizontal edge (r+1, c); moving up crosses (r, c)
            qubits.append(lat.qubit(r + 1 if step > 0 else r, c, True))
        else:
            # stars (r, c) and (r+1, c) share the vertical edge (r, c)
            qubits.append(lat.qubit(r if step > 0 else r - 1, c, False))
        r = (r + step) % d
    step = 1 if dc > 0 else -1
    for _ in range(abs(dc)):
        if kind == "Z":
            qubits.append(lat.qubit(r, c + 1 if step > 0 else c, False))
        else:
            qubits.append(lat.qubit(r, c if step > 0 else c - 1, True))
        c = (c + step) % d
    return qubits


def _shared_qubit(lat: CodeLattice, kind: str, sa: int, sb: int) -> int:
    """Data qubit between two spatially adjacent stabilizers."""
    d = lat.d
    ra, ca = divmod(sa, d)
    rb, cb = divmod(sb, d)
    dr = (rb - ra) % d
    dc = (cb - ca) % d
    if kind == "Z":
        if dc == 0 and dr == 1:
            return lat.qubit(rb, ca, True)
        if dc == 0 and dr == d - 1:
            return lat.qubit(ra, ca, True)
        if dr == 0 and dc == 1:
            return lat.qubit(ra, cb, False)
        if dr == 0 and dc == d - 1:
            return lat.qubit(ra, ca, False)
    else:
        if dc == 0 and dr == 1:
            return lat.qubit(ra, ca, False)
        if dc == 0 and dr == d - 1:
            return lat.qubit(rb, ca, False)
        if dr == 0 and dc == 1:
            return lat.qubit(ra, ca, True)
        if dr == 0 and dc == d - 1:
            return lat.qubit(ra, cb, True)
    raise ValueError(f"stabilizers {sa}, {sb} are not adjacent")


def correction_from_matching(
    lat: CodeLattice,
    kind: str,
    graph: MatchingGraph,
    matching: list[tuple[int, int]],
) -> np.ndarray:
    """Data-qubit flip pattern implied by the matched defect pairs.

    Pairs carrying an explicit spacetime path (flag-aware decoding) are
    corrected along that path's spatial steps; others take the canonical
    minimal path.
    """
    corr = np.zeros(lat.n_qubits, dtype=np.int64)
    n_stab = lat.d * lat.d
    for i, j in matching:
        key = (i, j) if (i, j) in graph.paths else (j, i)
        if graph.paths and key in graph.paths:
            nodes = graph.paths[key]
            for a, b in zip(nodes, nodes[1:]):
                sa, sb = a % n_stab, b % n_stab
                if sa != sb:
                    corr[_shared_qubit(lat, kind, sa, sb)] ^= 1
            continue
        si, _ti = graph.nodes[i]
        sj, _tj = graph.nodes[j]
        for q in _toric_correction_path(lat, kind, si, sj):
            corr[q] ^= 1
    return corr


def _stab_parities(lat: CodeLattice, kind: str, err: np.ndarray) -> np.ndarray:
    d = lat.d
    out = np.zeros(d * d, dtype=np.int64)
    for s in range(d * d):
        r, c = divmod(s, d)
        qs = plaquette_qubits(lat, r, c) if kind == "Z" else star_qubits(lat, r, c)
        out[s] = (err[qs[0]] + err[qs[1]] + err[qs[2]] + err[qs[3]]) & 1
    return out


def logical_failure(
    lat: CodeLattice,
    true_error: PauliString,
    corr_x: np.ndarray,
    corr_z: np.ndarray,
) -> int:
    """1 iff correction combined with the true error crosses a logical cycle.

    Also verifies the correction returns the state to the codespace; a
    residual syndrome indicates an internal inconsistency and raises.
    """
    d = lat.d
    n_q = lat.n_qubits
    err_x = np.array([(true_error.x >> q) & 1 for q in range(n_q)], dtype=np.int64)
    err_z = np.array([(true_error.z >> q) & 1 for q in range(n_q)], dtype=np.int64)
    res_x = err_x ^ corr_x
    res_z = err_z ^ corr_z
    if _stab_parities(lat, "Z", res_x).any() or _stab_parities(lat, "X", res_z).any():
        raise RuntimeError("correction left a residual syndrome")
    # Homology test: the residual X pattern is a dual-lattice cycle; it is a
    # logical exactly when it crosses a fundamental cut an odd number of
    # times.  Horizontal edges of row 0 are the dual edges crossing the
    # row-(d-1)|row-0 plaquette cut; vertical edges of column 0 cross the
    # column cut.  Dually for the residual Z pattern on the primal lattice.
    x_fail = (
        sum(res_x[lat.qubit(0, c, True)] for c in range(d)) & 1
        or sum(res_x[lat.qubit(r, 0, False)] for r in range(d)) & 1
    )
    z_fail = (
        sum(res_z[lat.qubit(0, c, False)] for c in range(d)) & 1
        or sum(res_z[lat.qubit(r, 0, True)] for r in range(d)) & 1
    )
    return 1 if (x_fail or z_fail) else 0


@dataclass
class LogicalRateResult:
    failures: int
    samples: int
    rate: float
    stderr: float


def logical_error_rate(
    lat: CodeLattice,
    so_z: StabilizerSuperoperator,
    so_x: StabilizerSuperoperator,
    samples: int,
    seed: int,
    abort_extraction=None,
    favor_factor: float = 0.5,
    use_flags: bool = True,
    missing_rate: float = 0.0,
    workers: int = 1,
    max_degree: int | None = None,
) -> LogicalRateResult:
    """Monte Carlo logical failure rate; deterministic given (seed, samples)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if lat.geometry == "planar":
        if abort_extraction is not None or missing_rate:
            raise NotImplementedError(
                "flags and abandonment are supported on the toric geometry only"
            )
        from .planar import planar_logical_error_rate

        res = planar_logical_error_rate(lat, so_z, so_x, samples, seed)
        return LogicalRateResult(res.failures, res.samples, res.rate, res.stderr)
    wz = edge_weights_from_superop(so_z, so_x)
    wx = edge_weights_from_superop(so_x, so_z)
    if abort_extraction is None:
        sampler = None
    elif isinstance(abort_extraction, tuple):
        sampler = AbortCaseSampler.from_extraction(*abort_extraction)
    else:
        sampler = AbortCaseSampler.from_extraction(abort_extraction)
    if workers > 1 and samples >= 64:
        from multiprocessing import Pool

        n_chunks = workers * 4
        bounds = [
            (samples * k // n_chunks, samples * (k + 1) // n_chunks)
            for k in range(n_chunks)
        ]
        jobs = [
            (lat, so_z, so_x, wz, wx, seed, lo, hi, sampler, favor_factor,
             use_flags, missing_rate, max_degree)
            for lo, hi in bounds
            if hi > lo
        ]
        with Pool(workers) as pool:
            failures = sum(pool.map(_decode_range, jobs))
    else:
        failures = _decode_range(
            (lat, so_z, so_x, wz, wx, seed, 0, samples, sampler, favor_factor,
             use_flags, missing_rate, max_degree)
        )
    rate = failures / samples
    stderr = math.sqrt(max(rate * (1 - rate), 1.0 / samples) / samples)
    return LogicalRateResult(failures, samples, rate, stderr)


def _decode_range(args) -> int:
    (lat, so_z, so_x, wz, wx, seed, lo, hi, abort_sampler, favor_factor, use_flags,
     missing_rate, max_degree) = args
    tables = SuperopSampler(lat, so_z, so_x, abort_sampler)
    failures = 0
    for i in range(lo, hi):
        failures += _decode_one(
            lat, so_z, so_x, wz, wx, (seed, i), abort_sampler, favor_factor,
            use_flags, missing_rate, tables, max_degree,
        )
    return failures


def _decode_one(
    lat, so_z, so_x, wz, wx, seed_key, abort_sampler, favor_factor, use_flags,
    missing_rate, tables=None, max_degree=None,
) -> int:
    rng = np.random.default_rng(seed_key)
    history, true_error = sample_syndrome_history(
        lat, so_z, so_x, rng, abort_sampler=abort_sampler,
        missing_rate=missing_rate, sampler=tables,
    )
    flags = history.flags if use_flags else None
    graph_z = build_matching_graph(
        history.detection_events_z, lat, wz, "Z", flags, history.missing,
        favor_factor, max_degree,
    )
    graph_x = build_matching_graph(
        history.detection_events_x, lat, wx, "X", flags, history.missing,
        favor_factor, max_degree,
    )
    corr_x = correction_from_matching(lat, "Z", graph_z, mwpm_decode(graph_z))
    corr_z = correction_from_matching(lat, "X", graph_x, mwpm_decode(graph_x))
    return logical_failure(lat, true_error, corr_x, corr_z)
