"""Reset-if-leaked exchange sequences for exchange-only spin qubits.

Synthesis (basin-hopping search), verification and Monte-Carlo noise
characterization of exchange-pulse sequences that return leaked qubit
population to the computational space using a two-spin ancilla.
"""

__version__ = "0.1.0"

from .basis import (
    BasisState,
    LINKS,
    SectorProjector,
    build_basis,
    oracle_exchange,
    raise_m,
    sector_projector,
)
from .exchange import (
    BlockUnitary,
    ExchangeSequence,
    RilIsometry,
    block_exchange,
    bundled_sequence,
    compose,
    isometry,
    load_sequence,
    save_sequence,
)
from .objective import (
    NotASolutionError,
    QaReversal,
    ResetState,
    RilSpec,
    extract_qubit_gate,
    extract_reset_state,
    fit_reversal,
    gate_penalty,
    reset_residual,
    total_residual,
    verify_sequence,
)
from .search import (
    SearchConfig,
    SolutionRecord,
    basin_hop,
    dedup,
    load_catalog,
    local_minimize,
    save_catalog,
)
from .noise import (
    ChiMatrix,
    MetricSet,
    NoiseModel,
    chi_average,
    metrics,
    perturb,
    sweep,
)
from .analysis import (
    FlagParams,
    GaugeParams,
    gauge_stationary,
    joint_flag_table,
    leakage_coherence_traceout,
    wrong_guess_given_0,
    wrong_guess_given_1,
)
