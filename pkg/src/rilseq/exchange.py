"""Closed-form exchange blocks, brickwork sequences and their isometries.

Exchange on a dot pair acts as exp(i*theta) on the pair singlet and trivially
on the triplet, so in the labelled total-spin basis of :mod:`rilseq.basis`
each gate is U = I + (exp(i*theta) - 1) * A with A the singlet projector
restricted to the sector. The 5x5 (J=1/2) and 4x4 (J=3/2) projector blocks
are hard-coded below in closed form; the test-suite checks them element-wise
against the brute-force 32-dimensional oracle. The J=5/2 block is always the
identity and is never stored.

A sequence is 20 angle slots laid out brickwork-style on the five-dot line.
Slot k (1-based) acts on link (3,4), (1,2), (4,5), (2,3) for k mod 4 = 1, 2,
3, 0; slots {4l+1, 4l+2} and {4l+3, 4l+4} form layers of simultaneously
applicable (disjoint, hence commuting) gates. Slot 19 is a placeholder that
keeps the numbering regular and is always inactive.

Angles are radians everywhere in memory; the sequence file format and the
bundled reference sequences use units of pi, converted only at the boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import LINKS

N_SLOTS = 20
PLACEHOLDER_SLOT = 19  # 1-based; always inactive

_S3 = math.sqrt(3.0)
_S5 = math.sqrt(5.0)


def _half_proj(link: tuple[int, int]) -> np.ndarray:
    s2, s6, s15 = math.sqrt(2), math.sqrt(6), math.sqrt(15)
    if link == (1, 2):
        a = np.array([
            [1 / 4, -_S3 / 4, 0, 0, 0],
            [-_S3 / 4, 3 / 4, 0, 0, 0],
            [0, 0, 1 / 4, -_S3 / 4, 0],
            [0, 0, -_S3 / 4, 3 / 4, 0],
            [0, 0, 0, 0, 0],
        ])
    elif link == (2, 3):
        a = np.diag([1.0, 0, 1, 0, 0])
    elif link == (3, 4):
        a = np.array([
            [3, 0, 0, 3, -3 * s2],
            [0, 3, 3, -2 * _S3, -s6],
            [0, 3, 3, -2 * _S3, -s6],
            [3, -2 * _S3, -2 * _S3, 7, -s2],
            [-3 * s2, -s6, -s6, -s2, 8],
        ]) / 12
    elif link == (4, 5):
        a = np.diag([1.0, 1, 0, 0, 0])
    else:
        raise ValueError(f"invalid exchange link {link}; must be one of {LINKS}")
    return a.astype(complex)


def _threehalf_proj(link: tuple[int, int]) -> np.ndarray:
    s15 = math.sqrt(15)
    if link == (1, 2):
        a = np.array([
            [0, 0, 0, 0],
            [0, 1 / 4, -_S3 / 4, 0],
            [0, -_S3 / 4, 3 / 4, 0],
            [0, 0, 0, 0],
        ])
    elif link == (2, 3):
        a = np.diag([0.0, 1, 0, 0])
    elif link == (3, 4):
        a = np.array([
            [3, 3, _S3, -s15],
            [3, 3, _S3, -s15],
            [_S3, _S3, 1, -_S5],
            [-s15, -s15, -_S5, 5],
        ]) / 12
    elif link == (4, 5):
        a = np.diag([1.0, 0, 0, 0])
    else:
        raise ValueError(f"invalid exchange link {link}; must be one of {LINKS}")
    return a.astype(complex)


_HALF_PROJ = {link: _half_proj(link) for link in LINKS}
_THREEHALF_PROJ = {link: _threehalf_proj(link) for link in LINKS}
for _a in (*_HALF_PROJ.values(), *_THREEHALF_PROJ.values()):
    _a.flags.writeable = False


def slot_link(slot: int) -> tuple[int, int]:
    """Link addressed by 1-based slot number."""
    if not 1 <= slot <= N_SLOTS:
        raise ValueError(f"slot must be 1..{N_SLOTS}, got {slot}")
    return {1: (3, 4), 2: (1, 2), 3: (4, 5), 0: (2, 3)}[slot % 4]


#: slot index (0-based) -> link
SLOT_LINKS = tuple(slot_link(k) for k in range(1, N_SLOTS + 1))


@dataclass(frozen=True)
class BlockUnitary:
    """Sector blocks of an exchange gate or composed sequence."""

    half: np.ndarray = field(repr=False)       # 5x5, basis |0>..|4>
    threehalf: np.ndarray = field(repr=False)  # 4x4, basis |5>..|8>

    def __matmul__(self, other: "BlockUnitary") -> "BlockUnitary":
        return BlockUnitary(self.half @ other.half, self.threehalf @ other.threehalf)

    @staticmethod
    def identity() -> "BlockUnitary":
        return BlockUnitary(np.eye(5, dtype=complex), np.eye(4, dtype=complex))


@dataclass(frozen=True)
class RilIsometry:
    """Sequence action on singlet-initialized ancillas.

    half: 5x2 (inputs |0>,|1>), threehalf: 4x1 (input |5>). Columns of an
    exact isometry are orthonormal.
    """

    half: np.ndarray = field(repr=False)
    threehalf: np.ndarray = field(repr=False)


def block_exchange(link: tuple[int, int], theta: float) -> BlockUnitary:
    """Closed-form sector blocks of a single exchange gate."""
    link = tuple(link)
    if link not in LINKS:
        raise ValueError(f"invalid exchange link {link}; must be one of {LINKS}")
    c = np.exp(1j * theta) - 1.0
    return BlockUnitary(
        np.eye(5, dtype=complex) + c * _HALF_PROJ[link],
        np.eye(4, dtype=complex) + c * _THREEHALF_PROJ[link],
    )


@dataclass(frozen=True)
class ExchangeSequence:
    """20 exchange angles with an active-slot mask over the fixed layout.

    Inactive slots carry angle zero; the placeholder slot 19 is always
    inactive. Angles are radians.
    """

    angles: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float).copy()
        mask = np.asarray(self.mask, dtype=bool).copy()
        if angles.shape != (N_SLOTS,) or mask.shape != (N_SLOTS,):
            raise ValueError(f"angles and mask must have length {N_SLOTS}")
        if mask[PLACEHOLDER_SLOT - 1]:
            raise ValueError(f"slot {PLACEHOLDER_SLOT} is a placeholder and must stay inactive")
        if np.any(angles[~mask] != 0.0):
            raise ValueError("inactive slots must carry angle 0")
        angles.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_pi_units(cls, angles_pi, mask=None, name: str = "") -> "ExchangeSequence":
        angles = np.asarray(angles_pi, dtype=float) * np.pi
        if mask is None:
            mask = angles != 0.0
            mask[PLACEHOLDER_SLOT - 1] = False
        return cls(angles=angles, mask=np.asarray(mask, dtype=bool), name=name)

    @property
    def angles_pi(self) -> np.ndarray:
        return self.angles / np.pi

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    def active_slots(self) -> tuple[int, ...]:
        """1-based numbers of the active slots."""
        return tuple(int(i) + 1 for i in np.flatnonzero(self.mask))

    def normalized(self) -> "ExchangeSequence":
        """Angles reduced mod 2*pi into [0, 2*pi); exp(i*theta) is unchanged."""
        angles = np.mod(self.angles, 2 * np.pi)
        angles[~self.mask] = 0.0
        return ExchangeSequence(angles=angles, mask=self.mask, name=self.name)

    def with_angles(self, angles: np.ndarray) -> "ExchangeSequence":
        return ExchangeSequence(angles=np.asarray(angles, float), mask=self.mask, name=self.name)


def compose(seq: ExchangeSequence) -> BlockUnitary:
    """Product of all slot gates, slot 1 acting first."""
    th, tt = _compose_columns(seq.angles, np.eye(5, dtype=complex), np.eye(4, dtype=complex))
    return BlockUnitary(th, tt)


def isometry(seq: ExchangeSequence) -> RilIsometry:
    """Restriction of the composed unitary to singlet-initialized ancillas.

    Keeps columns |0>,|1> of the J=1/2 block and column |5> of the J=3/2
    block; these are the only inputs reachable from an ancilla singlet.
    """
    th, tt = _compose_columns(
        seq.angles, np.eye(5, dtype=complex)[:, :2], np.eye(4, dtype=complex)[:, :1]
    )
    return RilIsometry(half=th, threehalf=tt)


def _compose_columns(angles: np.ndarray, th0: np.ndarray, tt0: np.ndarray):
    th, tt = th0, tt0
    for k in range(N_SLOTS):
        a = angles[k]
        if a == 0.0:
            continue
        c = np.exp(1j * a) - 1.0
        th = th + c * (_HALF_PROJ[SLOT_LINKS[k]] @ th)
        tt = tt + c * (_THREEHALF_PROJ[SLOT_LINKS[k]] @ tt)
    return th, tt


def isometry_columns(thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized isometry over a batch of angle vectors.

    thetas has shape (..., 20) in radians; returns (..., 5, 2) and
    (..., 4, 1) arrays. Used by the optimization and Monte-Carlo hot paths.
    """
    thetas = np.asarray(thetas, dtype=float)
    lead = thetas.shape[:-1]
    th = np.broadcast_to(np.eye(5, dtype=complex)[:, :2], lead + (5, 2)).copy()
    tt = np.broadcast_to(np.eye(4, dtype=complex)[:, :1], lead + (4, 1)).copy()
    for k in range(N_SLOTS):
        col = thetas[..., k]
        if not np.any(col):
            continue
        c = (np.exp(1j * col) - 1.0)[..., None, None]
        th = th + c * (_HALF_PROJ[SLOT_LINKS[k]] @ th)
        tt = tt + c * (_THREEHALF_PROJ[SLOT_LINKS[k]] @ tt)
    return th, tt


# ---------------------------------------------------------------------------
# sequence files and bundled reference sequences

_ANGLE_DIGITS = 12  # significant digits, units of pi, in all files


def _fmt(x: float) -> float:
    return float(f"{x:.{_ANGLE_DIGITS}g}")


def save_sequence(seq: ExchangeSequence, path) -> None:
    """Write a sequence record {name, angles_pi, mask} as JSON."""
    rec = {
        "name": seq.name,
        "angles_pi": [_fmt(a) for a in seq.angles_pi],
        "mask": [bool(b) for b in seq.mask],
    }
    Path(path).write_text(json.dumps(rec, indent=1) + "\n")


def load_sequence(path) -> ExchangeSequence:
    rec = json.loads(Path(path).read_text())
    return ExchangeSequence.from_pi_units(
        rec["angles_pi"], mask=rec["mask"], name=rec.get("name", "")
    )


# Reference sequences, angles in units of pi. q1 is arccos(1/3)/pi kept at
# full double precision; the flag sequences are published to 6 decimals.
_Q1 = math.acos(1.0 / 3.0) / math.pi

_BUNDLED_PI = {
    "no_flag": [_Q1, 0, 2 - _Q1, 1, 1.5, 1.5, 0, 1, 1.5, 0.5,
                0, 1, 1.5, 1.5, 1, 1, 1, 0, 0, 0],
    "best_flag": [0.496474, 0.511053, 0.407919, 1.128462, 0.644573,
                  1.456051, 0.233065, 1.473077, 1.574455, 1.481738,
                  0.296057, 0.778243, 0.458866, 0.762262, 0.654983,
                  0.907327, 0.495382, 0.403991, 0, 1.700957],
    "worst_flag": [1.540024, 1.988000, 1.646738, 0.463540, 1.603884,
                   0.829024, 1.183458, 1.404117, 0.613810, 1.416749,
                   1.310604, 1.379647, 1.556976, 1.310274, 0.517602,
                   1.411259, 1.144766, 0.015345, 0, 0.516077],
}

# no_flag uses 14 gates over 9 layers; the flag sequences use every slot
# except the placeholder.
_FLAG19_MASK = np.ones(N_SLOTS, dtype=bool)
_FLAG19_MASK[PLACEHOLDER_SLOT - 1] = False

_BUNDLED_MASKS = {
    "no_flag": np.asarray(_BUNDLED_PI["no_flag"]) != 0.0,
    "best_flag": _FLAG19_MASK,
    "worst_flag": _FLAG19_MASK,
}

#: bundled sequences are flaggable except no_flag
BUNDLED_FLAGGABLE = {"no_flag": False, "best_flag": True, "worst_flag": True}

BUNDLED_NAMES = tuple(_BUNDLED_PI)

#: the 14-slot layout of the shortest sequence, as a mask
RIL14_MASK = _BUNDLED_MASKS["no_flag"].copy()
#: all slots except the placeholder (flaggable searches)
RIL19_MASK = _FLAG19_MASK.copy()
for _m in (RIL14_MASK, RIL19_MASK, *_BUNDLED_MASKS.values()):
    _m.flags.writeable = False


def bundled_sequence(name: str) -> ExchangeSequence:
    """One of the shipped reference sequences: no_flag, best_flag, worst_flag."""
    if name not in _BUNDLED_PI:
        raise KeyError(f"unknown bundled sequence {name!r}; have {BUNDLED_NAMES}")
    return ExchangeSequence.from_pi_units(
        _BUNDLED_PI[name], mask=_BUNDLED_MASKS[name], name=name
    )


def _check_layout() -> None:
    """Cross-check the slot->link map against the layer commutation pattern."""
    rng = np.random.default_rng(12345)
    for layer_start in (0, 2):
        a, b = SLOT_LINKS[layer_start], SLOT_LINKS[layer_start + 1]
        if set(a) & set(b):
            raise AssertionError(f"layer links {a}, {b} are not disjoint")
        ta, tb = rng.uniform(0, 2 * np.pi, 2)
        u, v = block_exchange(a, ta), block_exchange(b, tb)
        d1 = np.max(np.abs((u @ v).half - (v @ u).half))
        d2 = np.max(np.abs((u @ v).threehalf - (v @ u).threehalf))
        if max(d1, d2) > 1e-12:
            raise AssertionError(f"layer gates on {a}, {b} do not commute")
    if SLOT_LINKS[PLACEHOLDER_SLOT - 1] != (4, 5):
        raise AssertionError("placeholder slot landed on an unexpected link")


_check_layout()
