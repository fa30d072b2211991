"""netstab: fault-tolerant stabilizer measurement over a noisy four-cell network.

Exact error-superoperator extraction for GHZ-mediated stabilizer measurement
protocols, Monte Carlo protocol-duration statistics under failure-reset
semantics, and surface-code threshold estimation with minimum-weight
perfect-matching decoding.
"""

__version__ = "0.1.0"

from .noise import NoiseParams, gate_channel, measurement_flip_prob, raw_bell_channel
from .pauli import (
    CliffordGateSpec,
    DegeneratePostSelectionError,
    PauliString,
    SparseErrorDist,
    anticommutes,
    conjugate_through,
    dist_apply_gate,
    dist_condition,
    dist_mix_channel,
    dist_truncate,
)
from .protocols import (
    AbortFilterOutcome,
    ProtocolLevel,
    ProtocolSpec,
    expedient,
    get_protocol,
    load_protocol,
    dump_protocol,
    monolithic,
    stringent,
    stringent_plus,
    validate,
)
from .superop import (
    StabilizerSuperoperator,
    WeightTable,
    aggregate,
    deserialize_superoperator,
    extract_superoperator,
    extract_stringent_plus,
    serialize_superoperator,
    success_probabilities,
    twirl,
)
from .schedule import (
    DurationStats,
    LevelTiming,
    memory_error,
    min_duration,
    rate_from_lifetime,
    sheet_time,
    simulate_duration,
)
from .matching import MatchingError, min_weight_perfect_matching
from .lattice import (
    CodeLattice,
    MatchingGraph,
    SyndromeHistory,
    build_matching_graph,
    logical_error_rate,
    logical_failure,
    mwpm_decode,
    sample_syndrome_history,
)
from .threshold import SweepPoint, find_crossing, sweep_local, sweep_network

__all__ = [
    "NoiseParams",
    "PauliString",
    "CliffordGateSpec",
    "SparseErrorDist",
    "StabilizerSuperoperator",
    "WeightTable",
    "AbortFilterOutcome",
    "ProtocolSpec",
    "ProtocolLevel",
    "expedient",
    "stringent",
    "stringent_plus",
    "monolithic",
    "get_protocol",
    "validate",
    "extract_superoperator",
    "extract_stringent_plus",
    "success_probabilities",
    "twirl",
    "aggregate",
    "serialize_superoperator",
    "deserialize_superoperator",
]
