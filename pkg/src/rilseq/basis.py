"""Explicit total-spin basis for the five-dot register and a brute-force exchange oracle.

The register is a line of five spin-1/2 particles: three qubit dots Q1, Q2, Q3
followed by two ancilla dots A1, A2. The full 32-dimensional product space
decomposes under total spin into J = 1/2 (two 5-fold label multiplets),
J = 3/2 (four labels, 4 M-values each) and an inert J = 5/2 sextet.

This module constructs the nine labelled representation states |0>..|8> as
explicit 32-component vectors, one representative per label plus ladder-raised
partners, together with the sector projectors and a full-Hilbert-space
exchange unitary. Everything downstream (the closed-form 5x5 / 4x4 blocks in
:mod:`rilseq.exchange`) is validated element-wise against this oracle.

Conventions, fixed once here:

* product ordering Q1 (most significant) .. A2 (least significant), spin-up
  encoded as bit 0;
* representative states are stored at the lowest weight (M = -1/2 for
  J = 1/2, M = -3/2 for J = 3/2) and other M generated by the total raising
  operator, so matrix elements of any total-spin-conserving operator are
  identical in every M sector;
* sign conventions of the labelled states are rigid: all block-matrix
  comparisons in the test-suite are exact, not phase-insensitive.

Labels:

===== ========================================== =====
label content (qubit-triple x ancilla-pair)      J
===== ========================================== =====
0     (q-spin 1/2, Q23 singlet)  x  A-singlet    1/2
1     (q-spin 1/2, Q23 triplet)  x  A-singlet    1/2
2     (q-spin 1/2, Q23 singlet)  x  A-triplet    1/2
3     (q-spin 1/2, Q23 triplet)  x  A-triplet    1/2
4     q-spin 3/2                 x  A-triplet    1/2
5     q-spin 3/2                 x  A-singlet    3/2
6     (q-spin 1/2, Q23 singlet)  x  A-triplet    3/2
7     (q-spin 1/2, Q23 triplet)  x  A-triplet    3/2
8     q-spin 3/2                 x  A-triplet    3/2
===== ========================================== =====

Labels 0-4 are ordered so that the J=1/2 sector carries the qubit (|0>,|1>
vs |2>,|3>: ancilla singlet vs triplet) with |4> the leaked J=1/2 state;
|5> is the leaked state reachable from a singlet-initialized ancilla and
|6>,|7> span the reset target space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

N_DOTS = 5
DIM = 2 ** N_DOTS

#: nearest-neighbour exchange links, 1-based dot numbering
LINKS = ((1, 2), (2, 3), (3, 4), (4, 5))

#: labels belonging to each total-spin sector
HALF_LABELS = (0, 1, 2, 3, 4)
THREEHALF_LABELS = (5, 6, 7, 8)

_TOL = 1e-12


def _ket(bits: str) -> np.ndarray:
    """Product ket from a u/d string, leftmost = most significant dot."""
    idx = 0
    for c in bits:
        idx = 2 * idx + (0 if c == "u" else 1)
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[idx] = 1.0
    return v


def _kron(*vs: np.ndarray) -> np.ndarray:
    out = vs[0]
    for v in vs[1:]:
        out = np.kron(out, v)
    return out


# two-spin pair states
_SINGLET = (_ket("ud") - _ket("du")) / np.sqrt(2)
_T0 = (_ket("ud") + _ket("du")) / np.sqrt(2)
_TP = _ket("uu")
_TM = _ket("dd")

_SP1 = np.array([[0, 1], [0, 0]], dtype=complex)  # raises spin: |d> -> |u>
_SZ1 = np.diag([0.5, -0.5]).astype(complex)


def _site_op(op: np.ndarray, site: int, n: int = N_DOTS) -> np.ndarray:
    mats = [np.eye(2, dtype=complex)] * n
    mats[site] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@lru_cache(maxsize=1)
def total_spin_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Total (J_+, J_z, J^2) over all five dots as 32x32 matrices."""
    jp = sum(_site_op(_SP1, i) for i in range(N_DOTS))
    jz = sum(_site_op(_SZ1, i) for i in range(N_DOTS))
    jm = jp.conj().T
    j2 = 0.5 * (jp @ jm + jm @ jp) + jz @ jz
    for m in (jp, jz, j2):
        m.flags.writeable = False
    return jp, jz, j2


@dataclass(frozen=True)
class BasisState:
    """One labelled total-spin basis state as an explicit product-basis vector."""

    label: int
    j: float
    m: float
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amplitudes.flags.writeable = False


def _triple_states() -> dict:
    """Qubit-triple (dots Q1..Q3) states keyed by (kind, m).

    kind '0Q': Q23 singlet; '1Q': Q23 triplet coupled to total 1/2;
    'L': total 3/2.  The m = +1/2 partner of '1Q' is ladder-generated,
    which fixes its sign relative to the lowest-weight state.
    """
    st = {
        ("0Q", -0.5): _kron(_ket("d"), _SINGLET),
        ("0Q", +0.5): _kron(_ket("u"), _SINGLET),
        ("1Q", -0.5): -np.sqrt(1 / 3) * _kron(_ket("d"), _T0)
        + np.sqrt(2 / 3) * _kron(_ket("u"), _TM),
        ("1Q", +0.5): +np.sqrt(1 / 3) * _kron(_ket("u"), _T0)
        - np.sqrt(2 / 3) * _kron(_ket("d"), _TP),
        ("L", -1.5): _ket("ddd"),
        ("L", -0.5): (_ket("ddu") + _ket("dud") + _ket("udd")) / np.sqrt(3),
        ("L", +0.5): (_ket("uud") + _ket("udu") + _ket("duu")) / np.sqrt(3),
        ("L", +1.5): _ket("uuu"),
    }
    return st


@lru_cache(maxsize=1)
def representative_states() -> tuple[BasisState, ...]:
    """The nine lowest-weight labelled states |0>..|8| as 32-vectors."""
    t = _triple_states()
    s = np.sqrt
    vecs = {
        0: _kron(t["0Q", -0.5], _SINGLET),
        1: _kron(t["1Q", -0.5], _SINGLET),
        2: -s(1 / 3) * _kron(t["0Q", -0.5], _T0) + s(2 / 3) * _kron(t["0Q", +0.5], _TM),
        3: -s(1 / 3) * _kron(t["1Q", -0.5], _T0) + s(2 / 3) * _kron(t["1Q", +0.5], _TM),
        4: s(1 / 2) * _kron(t["L", -1.5], _TP)
        - s(1 / 3) * _kron(t["L", -0.5], _T0)
        + s(1 / 6) * _kron(t["L", +0.5], _TM),
        5: _kron(t["L", -1.5], _SINGLET),
        6: _kron(t["0Q", -0.5], _TM),
        7: _kron(t["1Q", -0.5], _TM),
        8: -s(3 / 5) * _kron(t["L", -1.5], _T0) + s(2 / 5) * _kron(t["L", -0.5], _TM),
    }
    out = []
    for label, v in vecs.items():
        j = 0.5 if label in HALF_LABELS else 1.5
        out.append(BasisState(label=label, j=j, m=-j, amplitudes=v))
    return tuple(out)


def raise_m(state: BasisState) -> BasisState:
    """Apply the total raising operator and renormalize.

    The raw image has norm sqrt(j(j+1) - m(m+1)), which is divided out.
    Raising a top-weight state (m = j) is invalid.
    """
    if state.m >= state.j - 1e-9:
        raise ValueError(f"cannot raise top-weight state (j={state.j}, m={state.m})")
    jp, _, _ = total_spin_operators()
    raw = jp @ state.amplitudes
    norm = np.sqrt(state.j * (state.j + 1) - state.m * (state.m + 1))
    return BasisState(
        label=state.label, j=state.j, m=state.m + 1, amplitudes=raw / norm
    )


@lru_cache(maxsize=1)
def build_basis() -> tuple[BasisState, ...]:
    """All labelled basis states: 5 labels x 2 M-values plus 4 labels x 4.

    Ordered by label, then ascending m. Together the 26 states span the
    full J=1/2 and J=3/2 subspaces; the 6-dimensional J=5/2 sextet is
    inert under exchange and intentionally not represented.
    """
    out = []
    for rep in representative_states():
        chain = [rep]
        while chain[-1].m < rep.j - 1e-9:
            chain.append(raise_m(chain[-1]))
        out.extend(chain)
    return tuple(out)


def basis_matrix(j: float, m: float) -> np.ndarray:
    """Column matrix of the labelled states of total spin ``j`` at weight ``m``.

    Shape (32, 5) for j = 1/2 and (32, 4) for j = 3/2; columns ordered by label.
    """
    cols = [s.amplitudes for s in build_basis() if s.j == j and abs(s.m - m) < 1e-9]
    if not cols:
        raise ValueError(f"no basis states with j={j}, m={m}")
    return np.column_stack(cols)


def _pair_singlet_projector(link: tuple[int, int]) -> np.ndarray:
    if tuple(link) not in LINKS:
        raise ValueError(f"invalid exchange link {link}; must be one of {LINKS}")
    i = link[0] - 1
    p4 = np.outer(_SINGLET, _SINGLET.conj())
    return np.kron(
        np.kron(np.eye(2 ** i), p4), np.eye(2 ** (N_DOTS - i - 2))
    ).astype(complex)


@lru_cache(maxsize=8)
def _singlet_projector_cached(link: tuple[int, int]) -> np.ndarray:
    p = _pair_singlet_projector(link)
    p.flags.writeable = False
    return p


def oracle_exchange(link: tuple[int, int], theta: float) -> np.ndarray:
    """Full 32x32 exchange unitary exp(i*theta)|S_ij><S_ij| + |T_ij><T_ij|.

    The pair singlet picks up the phase exp(i*theta); triplet states and all
    other dots are untouched. theta = pi realizes SWAP on the pair up to the
    sector structure.
    """
    if not np.isfinite(theta):
        raise ValueError("exchange angle must be finite")
    p = _singlet_projector_cached(tuple(link))
    return np.eye(DIM, dtype=complex) + (np.exp(1j * theta) - 1.0) * p


def oracle_block(link: tuple[int, int], theta: float,
                 m_half: float = -0.5, m_threehalf: float = -1.5):
    """Exchange unitary conjugated into the labelled basis, per sector.

    Returns the (5x5, 4x4) pair of blocks at the requested weights. Because
    exchange conserves total spin, the result is independent of the chosen
    weights; the defaults are the stored representatives.
    """
    u = oracle_exchange(link, theta)
    bh = basis_matrix(0.5, m_half)
    bt = basis_matrix(1.5, m_threehalf)
    return bh.conj().T @ u @ bh, bt.conj().T @ u @ bt


@dataclass(frozen=True)
class SectorProjector:
    """A projector in both full-space (32x32) and label-block form."""

    kind: str
    matrix: np.ndarray = field(repr=False)
    block: np.ndarray = field(repr=False)  # 9x9 diagonal over labels 0..8

    def __post_init__(self):
        self.matrix.flags.writeable = False
        self.block.flags.writeable = False


#: labels whose qubit-triple content is unleaked (q-spin 1/2)
_QSPIN_HALF_LABELS = (0, 1, 2, 3, 6, 7)

_PROJECTOR_LABELS = {
    "P_Q": _QSPIN_HALF_LABELS,
    "P_L": (4, 5, 8),
    "P_half": HALF_LABELS,
}


@lru_cache(maxsize=8)
def sector_projector(kind: str) -> SectorProjector:
    """Build P_Q (qubit unleaked), P_L (qubit leaked) or P_half (total J=1/2).

    P_Q projects onto q-spin-1/2 content of the three qubit dots (tensored
    with identity on the ancillas), P_L = I - P_Q, and P_half onto the full
    total-spin-1/2 subspace. All three are idempotent and Hermitian; P_Q and
    P_L resolve the identity.
    """
    if kind not in _PROJECTOR_LABELS:
        raise ValueError(f"unknown projector kind {kind!r}")
    if kind == "P_half":
        mat = sum(
            np.outer(s.amplitudes, s.amplitudes.conj())
            for s in build_basis()
            if s.j == 0.5
        )
    else:
        t = _triple_states()
        kinds = ("0Q", "1Q") if kind == "P_Q" else ("L",)
        p8 = sum(
            np.outer(v, v.conj()) for (k, _), v in t.items() if k in kinds
        )
        mat = np.kron(p8, np.eye(4, dtype=complex))
    block = np.zeros((9, 9))
    for lbl in _PROJECTOR_LABELS[kind]:
        block[lbl, lbl] = 1.0
    return SectorProjector(kind=kind, matrix=np.asarray(mat), block=block)
