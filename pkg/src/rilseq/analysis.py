"""Flag-readout reliability and gauge behaviour of reset-if-leaked cycles.

The ancilla singlet-triplet measurement flags a reset: outcome 0 should mean
an unleaked qubit passed through untouched, outcome 1 that a leaked qubit was
reset. Given phenomenological measurement errors and the channel error
metrics of :mod:`rilseq.noise`, this module provides both leading-order
wrong-guess probabilities and the exact joint distribution over (flag,
output class, input class) built from the conditional table; exchange-only
noise conserves total spin, which pins P(singlet & leaked-out | unleaked-in)
to zero and makes unflagged leakage injection impossible.

The gauge (magnetic quantum number of the encoded qubit) is pumped toward a
uniform mixture by each unflaggable reset cycle and relaxed by spin-orbit
decay; the stationary state of one relax-then-pump cycle and the weight it
gives to residual coherence between unleaked and leaked amplitudes are in
closed form. A brute-force five-spin trace-out of coherent leakage
superpositions validates those coefficients and, with them, the two-branch
decomposition used for the entanglement fidelity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import build_basis

_LEADING_ORDER_LIMIT = 0.1


@dataclass(frozen=True)
class FlagParams:
    """Input leakage prior and singlet-triplet misidentification rates."""

    eps_L: float    # P(leaked input)
    eps_1S: float   # P(flag 1 | ancilla singlet)
    eps_0T: float   # P(flag 0 | ancilla triplet)

    def __post_init__(self):
        for name in ("eps_L", "eps_1S", "eps_0T"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")


@dataclass(frozen=True)
class GaugeParams:
    """Phenomenological gauge relaxation probability per cycle."""

    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")


class InconsistentMetricsError(ValueError):
    """Channel metrics violate eps_F >= p_L_ind, so the joint table is invalid."""


def _warn_if_large(flag: FlagParams, *values: float) -> None:
    vals = (flag.eps_L, flag.eps_1S, flag.eps_0T, *values)
    if any(v > _LEADING_ORDER_LIMIT for v in vals):
        warnings.warn(
            "error probabilities above 0.1: leading-order flag formulas "
            "are unreliable, use the exact joint table",
            stacklevel=3,
        )


def wrong_guess_given_0(flag: FlagParams, metrics) -> float:
    """Leading-order P(not 'unleaked in, unleaked out' | flag reads 0).

    Three second-order paths survive: induced leakage misread as a singlet,
    a reset misread as a singlet, and a leaked input whose transfer failed
    with the ancillas still in a singlet.
    """
    _warn_if_large(flag, metrics.p_L_ind, metrics.eps_5)
    return (
        flag.eps_0T * metrics.p_L_ind
        + flag.eps_0T * flag.eps_L
        + metrics.eps_5 * flag.eps_L
    )


def wrong_guess_given_1(flag: FlagParams, metrics) -> float:
    """Leading-order P(not 'leaked in, reset out' | flag reads 1).

    Equals 1 / (1 + eps_L / (eps_1S + eps_F)): flag clicks are only
    trustworthy when real leakage dominates flag-extraction errors. With a
    zero denominator and no leakage the value is undefined; 0 is returned
    with a warning since no false alarms can occur at all.
    """
    _warn_if_large(flag, metrics.eps_F)
    noise = flag.eps_1S + metrics.eps_F
    if noise == 0.0:
        if flag.eps_L == 0.0:
            warnings.warn(
                "wrong_guess_given_1 undefined: no flag-extraction noise and "
                "no leakage; returning 0 (a flag of 1 can never occur)",
                stacklevel=2,
            )
        return 0.0
    return 1.0 / (1.0 + flag.eps_L / noise)


@dataclass(frozen=True)
class FlagJointTable:
    """Exact joint distribution P(flag, output class, input class).

    Indexing: table[f, o, i] with f in {0, 1} (flag), o/i in {0: unleaked,
    1: leaked}. Built from total-spin-conserving channel conditionals, so
    all eight entries sum to one exactly.
    """

    table: np.ndarray

    def p(self, flag: int, out_leaked: int, in_leaked: int) -> float:
        return float(self.table[flag, out_leaked, in_leaked])

    def p_flag(self, flag: int) -> float:
        return float(self.table[flag].sum())

    def wrong_guess_given(self, flag: int) -> float:
        """Exact counterpart of the leading-order wrong-guess formulas."""
        total = self.p_flag(flag)
        if total == 0.0:
            return 0.0
        expected = (0, 0) if flag == 0 else (0, 1)  # (out, in) the flag asserts
        return float((self.table[flag].sum() - self.table[flag][expected]) / total)


def joint_flag_table(flag: FlagParams, metrics) -> FlagJointTable:
    """Assemble P(F,O,I) = sum_j P(F|ancilla j) P(j, O | I) P(I) exactly.

    The channel conditionals come from the metric set: induced leakage is
    always triplet-flagged (spin conservation), a leaked input either resets
    (triplet), stays leaked with singlet ancillas (eps_5) or stays leaked
    with triplet ancillas (eps_8).
    """
    p_l_ind = metrics.p_L_ind
    eps_f = metrics.eps_F
    eps5, eps8 = metrics.eps_5, metrics.eps_8
    if eps_f < p_l_ind:
        raise InconsistentMetricsError(
            f"eps_F={eps_f:.3e} < p_L_ind={p_l_ind:.3e}: the flag-failure "
            "projector contains the leakage projector, so this cannot happen"
        )
    # P(ancilla j, out | in): rows (j, out), columns in {unleaked, leaked}
    cond = {
        ("S", 0): np.array([1.0 - eps_f, 0.0]),
        ("T", 0): np.array([eps_f - p_l_ind, 1.0 - eps5 - eps8]),
        ("S", 1): np.array([0.0, eps5]),
        ("T", 1): np.array([p_l_ind, eps8]),
    }
    p_in = np.array([1.0 - flag.eps_L, flag.eps_L])
    p_flag_given = {
        ("S", 0): 1.0 - flag.eps_1S,
        ("S", 1): flag.eps_1S,
        ("T", 0): flag.eps_0T,
        ("T", 1): 1.0 - flag.eps_0T,
    }
    table = np.zeros((2, 2, 2))
    for (anc, out), pvec in cond.items():
        for f in (0, 1):
            table[f, out, :] += p_flag_given[(anc, f)] * pvec * p_in
    return FlagJointTable(table=table)


# ---------------------------------------------------------------------------
# gauge pumping and relaxation


def gauge_pumping_matrix() -> np.ndarray:
    """Doubly stochastic gauge redistribution of one ideal unflaggable reset."""
    return np.array([[1.0, 2.0], [2.0, 1.0]]) / 3.0


def relaxation_matrix(eta: float) -> np.ndarray:
    """Column-stochastic spin relaxation toward the lower gauge state."""
    return np.array([[1.0, eta], [0.0, 1.0 - eta]])


@dataclass(frozen=True)
class GaugeStationary:
    p_down: float
    p_up: float
    decay_eigenvalue: float
    coherence_weight: float


def gauge_stationary(g: GaugeParams) -> GaugeStationary:
    """Fixed point of relax-then-pump, its decay mode and coherence weight.

    The stationary populations are (1 +- 3*eta/(4-eta))/2; the orthogonal
    mode decays with eigenvalue -(1-eta)/3 per cycle; residual coherence
    between unleaked and leaked amplitudes is weighted by the stationary
    gauge polarization 3*eta/(4-eta) ~ 3*eta/4.
    """
    eta = g.eta
    pol = 3.0 * eta / (4.0 - eta)
    return GaugeStationary(
        p_down=(1.0 + pol) / 2.0,
        p_up=(1.0 - pol) / 2.0,
        decay_eigenvalue=-(1.0 - eta) / 3.0,
        coherence_weight=pol,
    )


# ---------------------------------------------------------------------------
# brute-force trace-out of coherent leakage superpositions


def _state(label: int, m: float) -> np.ndarray:
    for s in build_basis():
        if s.label == label and abs(s.m - m) < 1e-9:
            return s.amplitudes
    raise ValueError(f"no basis state with label {label}, m {m}")


def _triple_frames():
    """Qubit-triple states grouped by representation label, per gauge m."""
    from .basis import _triple_states  # explicit product-state constructions

    t = _triple_states()
    frames = {"0Q": {}, "1Q": {}, "L": {}}
    for (kind, m), v in t.items():
        frames[kind][m] = v
    return frames


def rep_level_density(rho32: np.ndarray, decohere_ancilla: bool = True) -> np.ndarray:
    """Reduce a five-spin density matrix to the representation level.

    Optionally dephases in the ancilla singlet/triplet basis first (the
    ancillas are discarded to the environment), then traces the ancilla pair
    and the gauge, returning a 3x3 matrix over {unleaked 0, unleaked 1,
    leaked}.
    """
    from .basis import _SINGLET, _T0, _TM, _TP

    rho = np.asarray(rho32, dtype=complex)
    if decohere_ancilla:
        deph = np.zeros_like(rho)
        for av in (_SINGLET, _TM, _T0, _TP):
            pa = np.kron(np.eye(8), np.outer(av, av.conj()))
            deph += pa @ rho @ pa
        rho = deph
    rho8 = np.einsum("iaja->ij", rho.reshape(8, 4, 8, 4))
    frames = _triple_frames()
    kinds = ("0Q", "1Q", "L")
    out = np.zeros((3, 3), dtype=complex)
    for i, ki in enumerate(kinds):
        for j, kj in enumerate(kinds):
            for m, vi in frames[ki].items():
                vj = frames[kj].get(m)
                if vj is not None:
                    out[i, j] += vi.conj() @ rho8 @ vj
    return out


@dataclass(frozen=True)
class TraceoutResult:
    """Reduced state of a coherent (unleaked + leaked) superposition."""

    rep_density: np.ndarray     # 3x3 over {0_Q, 1_Q, leaked}
    branch_weights: dict        # ancilla branch -> trace weight
    coherence_ratio: complex    # <0_Q|rho|L> / (alpha * conj(beta))
    purity: float


def leakage_coherence_traceout(alpha: complex, beta: complex,
                               gauge: float = -0.5) -> TraceoutResult:
    """Discard the ancillas of alpha |unleaked, triplet-coupled> + beta |leaked>.

    The input is the coherent J=1/2 superposition of the ancilla-triplet
    unleaked state (label 2) and the leaked state (label 4) at the given
    gauge. After ancilla dephasing and trace the coherence between unleaked
    and leaked amplitudes survives with weight +-2/3 (sign set by the gauge),
    and the purity at |alpha|^2 = |beta|^2 = 1/2 is 13/18.
    """
    if gauge not in (-0.5, +0.5):
        raise ValueError("gauge must be -1/2 or +1/2")
    psi = alpha * _state(2, gauge) + beta * _state(4, gauge)
    rho = np.outer(psi, psi.conj())
    from .basis import _SINGLET, _T0, _TM, _TP

    weights = {}
    for name, av in (("S", _SINGLET), ("T-", _TM), ("T0", _T0), ("T+", _TP)):
        pa = np.kron(np.eye(8), np.outer(av, av.conj()))
        weights[name] = float(np.real(np.trace(pa @ rho)))
    sig = rep_level_density(rho)
    denom = alpha * np.conj(beta)
    ratio = complex(sig[0, 2] / denom) if abs(denom) > 1e-14 else 0.0
    return TraceoutResult(
        rep_density=sig,
        branch_weights=weights,
        coherence_ratio=ratio,
        purity=float(np.real(np.trace(sig @ sig))),
    )


def qubit_channel_rep_level(u32: np.ndarray, gauge: float = -0.5) -> np.ndarray:
    """Brute-force qubit channel of a five-spin unitary, as a Choi-like table.

    Feeds the four operator-basis inputs |j><k| (j, k unleaked qubit states
    at the given gauge, ancillas in a singlet) through u32, traces ancillas
    and gauge, and returns t[j, k] = 3x3 rep-level output of E(|j><k|).
    Independent of the block decomposition; used to validate the two-branch
    entanglement-fidelity formula.
    """
    ins = [_state(0, gauge), _state(1, gauge)]
    out = np.empty((2, 2, 3, 3), dtype=complex)
    for j in range(2):
        for k in range(2):
            rho = np.outer(u32 @ ins[j], (u32 @ ins[k]).conj())
            out[j, k] = rep_level_density(rho)
    return out


def entanglement_fidelity_oracle(u32: np.ndarray, gauge: float = -0.5) -> float:
    """F_e of the traced qubit channel, computed entirely in the 32-dim space."""
    t = qubit_channel_rep_level(u32, gauge)
    return float(np.real(sum(t[j, k][j, k] for j in range(2) for k in range(2))) / 4)
