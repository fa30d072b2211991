"""Planar surface-code variant with boundary matching.

Sites live on a (2d-1) x (2d-1) grid: data qubits where row and column
parities agree (d^2 primal + (d-1)^2 dual qubits), Z-type plaquettes at
(even row, odd column), X-type stars at (odd row, even column).  Boundary
stabilizers act on three qubits; they draw from the same extracted
superoperator with the absent qubit's error letter dropped.  Defect chains
terminate on the rough boundaries (left/right for the Z graph, top/bottom
for the X graph), realized in the matching by one zero-cost-paired virtual
boundary node per defect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matching import min_weight_perfect_matching
from .pauli import PauliString
from .superop import StabilizerSuperoperator
from .lattice import (
    CodeLattice,
    EdgeWeights,
    SyndromeHistory,
    _superop_tables,
    edge_weights_from_superop,
)


class PlanarLayout:
    """Index tables for one code distance."""

    def __init__(self, d: int):
        self.d = d
        self.size = 2 * d - 1
        self.qubit_index: dict[tuple[int, int], int] = {}
        for i in range(self.size):
            for j in range(self.size):
                if i % 2 == j % 2:
                    self.qubit_index[(i, j)] = len(self.qubit_index)
        self.n_qubits = len(self.qubit_index)
        self.plaquettes = [
            (i, j)
            for i in range(0, self.size, 2)
            for j in range(1, self.size, 2)
        ]
        self.stars = [
            (i, j)
            for i in range(1, self.size, 2)
            for j in range(0, self.size, 2)
        ]
        self.plaq_qubits = [self._support(ij) for ij in self.plaquettes]
        self.star_qubits = [self._support(ij) for ij in self.stars]
        # logical operators: the Z string runs top-bottom (a primal column,
        # ending on the smooth boundaries), the X string runs left-right (a
        # primal row, ending on the rough boundaries)
        self.logical_z = [self.qubit_index[(i, 0)] for i in range(0, self.size, 2)]
        self.logical_x = [self.qubit_index[(0, j)] for j in range(0, self.size, 2)]

    def _support(self, ij: tuple[int, int]) -> list[int]:
        i, j = ij
        out = []
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            site = (i + di, j + dj)
            if site in self.qubit_index:
                out.append(self.qubit_index[site])
        return out


def _planar_parities(layout: PlanarLayout, supports, err: np.ndarray) -> np.ndarray:
    return np.array([err[qs].sum() & 1 for qs in supports], dtype=np.int64)


def sample_planar_history(
    lat: CodeLattice,
    so_z: StabilizerSuperoperator,
    so_x: StabilizerSuperoperator,
    rng: np.random.Generator,
    layout: PlanarLayout | None = None,
) -> tuple[SyndromeHistory, PauliString]:
    """Planar analogue of the toric syndrome sampler (no flags/abandonment)."""
    if layout is None:
        layout = PlanarLayout(lat.d)
    T = lat.rounds
    n_q = layout.n_qubits
    tz = _superop_tables(so_z)
    tx = _superop_tables(so_x)
    err_x = np.zeros(n_q, dtype=np.int64)
    err_z = np.zeros(n_q, dtype=np.int64)
    out_z = np.zeros((T + 1, len(layout.plaquettes)), dtype=np.int64)
    out_x = np.zeros((T + 1, len(layout.stars)), dtype=np.int64)

    for t in range(T):
        par_z = _planar_parities(layout, layout.plaq_qubits, err_x)
        par_x = _planar_parities(layout, layout.star_qubits, err_z)
        for out, par, tbl, supports, comp in (
            (out_z, par_z, tz, layout.plaq_qubits, (err_x, err_z)),
            (out_x, par_x, tx, layout.star_qubits, (err_x, err_z)),
        ):
            u = rng.random(len(supports))
            idx = np.minimum(
                np.searchsorted(tbl[0], u, side="right"), len(tbl[0]) - 1
            )
            out[t, :] = par ^ tbl[3][idx]
            for s, entry in enumerate(idx):
                xm, zm = int(tbl[1][entry]), int(tbl[2][entry])
                if not (xm or zm):
                    continue
                for b, q in enumerate(supports[s]):
                    comp[0][q] ^= (xm >> b) & 1
                    comp[1][q] ^= (zm >> b) & 1
    out_z[T, :] = _planar_parities(layout, layout.plaq_qubits, err_x)
    out_x[T, :] = _planar_parities(layout, layout.star_qubits, err_z)

    def detections(out):
        events = []
        n = out.shape[1]
        for s in range(n):
            prev = 0
            for t in range(T + 1):
                if out[t, s] != prev:
                    events.append((s, t))
                prev = out[t, s]
        return events

    history = SyndromeHistory(detections(out_z), detections(out_x))
    xmask = zmask = 0
    for q in np.nonzero(err_x)[0]:
        xmask |= 1 << int(q)
    for q in np.nonzero(err_z)[0]:
        zmask |= 1 << int(q)
    return history, PauliString(n_q, xmask, zmask)


def _boundary_distance(layout: PlanarLayout, kind: str, stab: tuple[int, int]) -> int:
    i, j = stab
    if kind == "Z":  # chains end on left/right boundaries
        return min((j + 1) // 2, (layout.size - j) // 2)
    return min((i + 1) // 2, (layout.size - i) // 2)


def decode_planar(
    layout: PlanarLayout,
    kind: str,
    events: list[tuple[int, int]],
    weights: EdgeWeights,
) -> np.ndarray:
    """Match defects against each other and the rough boundaries; returns
    the data-qubit correction pattern."""
    stabs = layout.plaquettes if kind == "Z" else layout.stars
    n = len(events)
    corr = np.zeros(layout.n_qubits, dtype=np.int64)
    if n == 0:
        return corr
    # nodes: 0..n-1 defects, n..2n-1 their virtual boundary partners
    edges = []
    for a in range(n):
        sa, ta = events[a]
        ia, ja = stabs[sa]
        for b in range(a + 1, n):
            sb, tb = events[b]
            ib, jb = stabs[sb]
            w = (abs(ia - ib) // 2 + abs(ja - jb) // 2) * weights.space + abs(
                ta - tb
            ) * weights.time
            edges.append((a, b, w))
        edges.append((a, n + a, _boundary_distance(layout, kind, stabs[sa]) * weights.space))
    for a in range(n):
        for b in range(a + 1, n):
            edges.append((n + a, n + b, 0.0))
    pairs = min_weight_perfect_matching(2 * n, edges)

    for a, b in pairs:
        if a >= n and b >= n:
            continue
        if b >= n:
            _apply_boundary_path(layout, kind, stabs[events[a][0]], corr)
        else:
            _apply_path(layout, kind, stabs[events[a][0]], stabs[events[b][0]], corr)
    return corr


def _flip(layout: PlanarLayout, corr, site):
    corr[layout.qubit_index[site]] ^= 1


def _apply_path(layout, kind, sa, sb, corr):
    (ia, ja), (ib, jb) = sa, sb
    i, j = ia, ja
    step = 2 if ib > i else -2
    while i != ib:
        _flip(layout, corr, (i + step // 2, j))
        i += step
    step = 2 if jb > j else -2
    while j != jb:
        _flip(layout, corr, (i, j + step // 2))
        j += step


def _apply_boundary_path(layout, kind, stab, corr):
    i, j = stab
    if kind == "Z":
        if (j + 1) // 2 <= (layout.size - j) // 2:
            while j >= 0:
                _flip(layout, corr, (i, j - 1))
                j -= 2
        else:
            while j < layout.size:
                _flip(layout, corr, (i, j + 1))
                j += 2
    else:
        if (i + 1) // 2 <= (layout.size - i) // 2:
            while i >= 0:
                _flip(layout, corr, (i - 1, j))
                i -= 2
        else:
            while i < layout.size:
                _flip(layout, corr, (i + 1, j))
                i += 2


def planar_logical_failure(
    layout: PlanarLayout, true_error: PauliString, corr_x, corr_z
) -> int:
    n_q = layout.n_qubits
    err_x = np.array([(true_error.x >> q) & 1 for q in range(n_q)], dtype=np.int64)
    err_z = np.array([(true_error.z >> q) & 1 for q in range(n_q)], dtype=np.int64)
    res_x = err_x ^ corr_x
    res_z = err_z ^ corr_z
    if (
        _planar_parities(layout, layout.plaq_qubits, res_x).any()
        or _planar_parities(layout, layout.star_qubits, res_z).any()
    ):
        raise RuntimeError("correction left a residual syndrome")
    x_fail = int(res_x[layout.logical_z].sum()) & 1
    z_fail = int(res_z[layout.logical_x].sum()) & 1
    return 1 if (x_fail or z_fail) else 0


@dataclass
class PlanarRateResult:
    failures: int
    samples: int
    rate: float
    stderr: float


def planar_logical_error_rate(
    lat: CodeLattice,
    so_z: StabilizerSuperoperator,
    so_x: StabilizerSuperoperator,
    samples: int,
    seed: int,
) -> PlanarRateResult:
    layout = PlanarLayout(lat.d)
    wz = edge_weights_from_superop(so_z, so_x)
    wx = edge_weights_from_superop(so_x, so_z)
    failures = 0
    for i in range(samples):
        rng = np.random.default_rng((seed, i))
        history, err = sample_planar_history(lat, so_z, so_x, rng, layout)
        corr_x = decode_planar(layout, "Z", history.detection_events_z, wz)
        corr_z = decode_planar(layout, "X", history.detection_events_x, wx)
        failures += planar_logical_failure(layout, err, corr_x, corr_z)
    rate = failures / samples
    stderr = math.sqrt(max(rate * (1 - rate), 1.0 / samples) / samples)
    return PlanarRateResult(failures, samples, rate, stderr)
