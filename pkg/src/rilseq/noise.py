"""Monte-Carlo characterization of sequences under correlated exchange noise.

Charge noise shifts exchange amplitudes, so each slot angle is perturbed
multiplicatively, theta_k -> theta_k * (1 + x_k), with x drawn per sample
from one of two models:

* ``static``: one zero-mean Gaussian multiplier of width sigma per physical
  link (4 draws), replicated across all slots addressing that link. Exchange
  noise is dominated by low frequencies, so it is held fixed over the whole
  sequence. This is the default.
* ``markovian``: an independent Gaussian per slot (20 draws).

The Gaussian is deliberately not folded at x = -1; noise strengths where a
multiplier could flip an angle's sign are far beyond the modeled regime.

For every sample the singlet-ancilla isometry is stacked into the
14-component vector v = [column |0>; column |1>; J=3/2 column] over the
fixed operator basis E_0..E_13 (|0><0| .. |4><0|, |0><1| .. |4><1|,
|5><5| .. |8><5|), and the averaged process matrix is the sample mean of
v v^dagger. A per-sequence QA output rotation may be undone first (pass
``rev``), so the failure-to-flag estimator measures deviation from the
sequence's own ideal ancilla output; for flag-compatible sequences
rev = (0, 0) and the channel is untouched.

Besides the matrix itself, the averager accumulates per-sample scalar
moments of every derived error metric (and the fourth moment of the J=3/2
column, from which the reset-error variance follows for any reset state),
so all Monte-Carlo error bars are exact sample statistics rather than
propagated bounds.

Sampling runs in fixed-size chunks with one RNG substream per chunk
(SeedSequence(seed, spawn_key=(chunk,))) and a fixed-order reduction, so
results are bit-for-bit reproducible and independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exchange import ExchangeSequence, isometry_columns
from .objective import QaReversal, ResetState, _reversal_unitary

NOISE_MODELS = ("static", "markovian")

#: operator basis labels for the 14x14 process matrix
CHI_BASIS = tuple(
    [f"|{i}><0|" for i in range(5)]
    + [f"|{i}><1|" for i in range(5)]
    + [f"|{i}><5|" for i in range(5, 9)]
)

_CHUNK = 8192

_METRIC_NAMES = (
    "p_L_ind", "eps_F", "F_e", "F_Q", "one_minus_F2",
    "eps_5", "eps_8", "eps_L_rem",
)


@dataclass(frozen=True)
class NoiseModel:
    """Relative exchange-noise strength and its correlation structure."""

    sigma: float
    correlation: str = "static"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.correlation not in NOISE_MODELS:
            raise ValueError(f"correlation must be one of {NOISE_MODELS}")


def draw_multipliers(model: NoiseModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Sample n noise vectors x of length 20 according to the model."""
    if model.correlation == "static":
        g = rng.normal(0.0, model.sigma, size=(n, 4))
        return np.tile(g, 5)
    return rng.normal(0.0, model.sigma, size=(n, 20))


def perturb(seq: ExchangeSequence, x: np.ndarray) -> ExchangeSequence:
    """Apply multiplicative noise slotwise; inactive (zero) slots stay zero."""
    x = np.asarray(x, dtype=float)
    if x.shape != (20,):
        raise ValueError("noise vector must have length 20")
    if not np.all(np.isfinite(x)):
        raise ValueError("noise vector must be finite")
    return seq.with_angles(seq.angles * (1.0 + x))


@dataclass(frozen=True)
class ChiMatrix:
    """Noise-averaged 14x14 process matrix with exact sampling statistics."""

    matrix: np.ndarray = field(repr=False)
    sem: np.ndarray = field(repr=False)  # per-entry standard error (real scale)
    n_samples: int
    seed: int
    model: NoiseModel
    rev: QaReversal
    basis: tuple = CHI_BASIS
    # per-sample scalar moments {name: (sum, sum of squares)} and the fourth
    # moment tensor of the J=3/2 column; consumed by metrics()
    moments: dict = field(repr=False, default_factory=dict)
    fourth_moment: np.ndarray = field(repr=False, default=None)


def _sample_vectors(seq_angles: np.ndarray, model: NoiseModel, vdag: np.ndarray,
                    seed: int, chunk_id: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_id,)))
    x = draw_multipliers(model, rng, n)
    thetas = seq_angles[None, :] * (1.0 + x)
    th, tt = isometry_columns(thetas)
    top = th[:, :4, :].reshape(n, 2, 2, 2)
    revd = np.einsum("ab,nbqj->naqj", vdag, top).reshape(n, 4, 2)
    half = np.concatenate([revd, th[:, 4:5, :]], axis=1)  # (n, 5, 2)
    v = np.concatenate([half.transpose(0, 2, 1).reshape(n, 10), tt[:, :, 0]], axis=1)
    return v


def _chunk_stats(v: np.ndarray) -> dict:
    n = v.shape[0]
    q = np.abs(v) ** 2
    p = (q[:, 4] + q[:, 9]) / 2
    eps_f = (q[:, 2] + q[:, 3] + q[:, 4] + q[:, 7] + q[:, 8] + q[:, 9]) / 2
    f_e = (np.abs(v[:, 0] + v[:, 6]) ** 2 + np.abs(v[:, 2] + v[:, 8]) ** 2) / 4
    f_q = (2 * f_e + 1 - p) / 3
    eps5 = q[:, 10]
    eps8 = q[:, 13]
    scalars = {
        "p_L_ind": p,
        "eps_F": eps_f,
        "F_e": f_e,
        "F_Q": f_q,
        "one_minus_F2": (1 - f_q) - p,
        "eps_5": eps5,
        "eps_8": eps8,
        "eps_L_rem": eps5 + eps8,
    }
    t = v[:, 10:]
    tc = t.conj()
    return {
        "n": n,
        "chi": np.einsum("bi,bj->ij", v, v.conj()),
        "chi_sq": q.T @ q,  # E|chi_ij|^2 accumulator: |v_i|^2 |v_j|^2
        "scalars": {k: (val.sum(), (val ** 2).sum()) for k, val in scalars.items()},
        "e4": np.einsum("bi,bj,bk,bl->ijkl", t, tc, t, tc, optimize=True),
    }


def chi_average(
    seq: ExchangeSequence,
    model: NoiseModel,
    n_samples: int,
    seed: int = 0,
    rev: QaReversal | None = None,
    workers: int = 1,
) -> ChiMatrix:
    """Average v v^dagger over noise realizations of the sequence.

    ``rev`` (default: none) is the QA output rotation undone before stacking;
    pass the sequence's fitted reversal so the flag-failure estimator is
    meaningful for unflaggable sequences. Deterministic in
    (seed, n_samples, model); ``workers`` only parallelizes chunks.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rev = rev or QaReversal(0.0, 0.0)
    vdag = _reversal_unitary(rev).conj().T
    sizes = [_CHUNK] * (n_samples // _CHUNK)
    if n_samples % _CHUNK:
        sizes.append(n_samples % _CHUNK)

    def job(i):
        v = _sample_vectors(seq.angles, model, vdag, seed, i, sizes[i])
        return _chunk_stats(v)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]

    chi_sum = np.zeros((14, 14), dtype=complex)
    chi_sq = np.zeros((14, 14))
    e4 = np.zeros((4, 4, 4, 4), dtype=complex)
    sums = {k: 0.0 for k in _METRIC_NAMES}
    sqs = {k: 0.0 for k in _METRIC_NAMES}
    for part in parts:  # fixed chunk order
        chi_sum += part["chi"]
        chi_sq += part["chi_sq"]
        e4 += part["e4"]
        for k in _METRIC_NAMES:
            s, s2 = part["scalars"][k]
            sums[k] += s
            sqs[k] += s2

    n = float(n_samples)
    mean = chi_sum / n
    var = np.maximum(chi_sq / n - np.abs(mean) ** 2, 0.0)
    return ChiMatrix(
        matrix=mean,
        sem=np.sqrt(var / n),
        n_samples=n_samples,
        seed=seed,
        model=model,
        rev=rev,
        moments={k: (sums[k], sqs[k]) for k in _METRIC_NAMES},
        fourth_moment=e4 / n,
    )


@dataclass(frozen=True)
class MetricSet:
    """Scalar channel-error metrics with Monte-Carlo standard errors.

    All entries are probabilities or fidelities in [0, 1] up to sampling
    noise. ``sem`` maps each metric name to its standard error of the mean.
    """

    p_L_ind: float
    F_e: float
    F_Q: float
    one_minus_F2: float
    eps_F: float
    eps_5: float
    eps_8: float
    eps_L_rem: float
    eps_R: float
    sem: dict
    n_samples: int
    seed: int
    sigma: float

    def value(self, name: str) -> float:
        return getattr(self, name)

    @property
    def one_minus_F_Q(self) -> float:
        return 1.0 - self.F_Q


def metrics(chi: ChiMatrix, reset: ResetState) -> MetricSet:
    """Derive all scalar error metrics from an averaged process matrix.

    ``reset`` must come from the ideal (sigma = 0) sequence; it defines the
    target state for the reset error. Means and standard errors are exact
    sample statistics accumulated during averaging.
    """
    if reset is None:
        raise ValueError("a reset state is required to evaluate the reset error")
    n = chi.n_samples
    vals = {}
    sems = {}
    for k, (s, s2) in chi.moments.items():
        m = s / n
        vals[k] = m
        sems[k] = float(np.sqrt(max(s2 / n - m * m, 0.0) / n))
    # reset error: 1 - <psi| E(|5><5|) |psi>, variance from the 4th moment
    psi = np.array([0.0, reset.alpha, reset.beta, 0.0])
    block = chi.matrix[10:, 10:]
    overlap = float(np.real(psi.conj() @ block @ psi))
    m4 = float(np.real(
        np.einsum("i,j,k,l,ijkl->", psi.conj(), psi, psi.conj(), psi,
                  chi.fourth_moment)
    ))
    eps_r = 1.0 - overlap
    sems["eps_R"] = float(np.sqrt(max(m4 - overlap ** 2, 0.0) / n))
    # sem of 1 - F_Q equals sem of F_Q
    sems["one_minus_F_Q"] = sems["F_Q"]
    return MetricSet(
        p_L_ind=vals["p_L_ind"],
        F_e=vals["F_e"],
        F_Q=vals["F_Q"],
        one_minus_F2=vals["one_minus_F2"],
        eps_F=vals["eps_F"],
        eps_5=vals["eps_5"],
        eps_8=vals["eps_8"],
        eps_L_rem=vals["eps_L_rem"],
        eps_R=eps_r,
        sem=sems,
        n_samples=n,
        seed=chi.seed,
        sigma=chi.model.sigma,
    )


def sweep(
    seq: ExchangeSequence,
    sigmas,
    n_samples: int,
    seed: int = 0,
    correlation: str = "static",
    rev: QaReversal | None = None,
    reset: ResetState | None = None,
    workers: int = 1,
) -> list[MetricSet]:
    """chi_average + metrics for each noise strength.

    The reset state defaults to the one extracted from the ideal sequence.
    Each sigma gets its own child seed derived from ``seed``, so rows are
    independent and the whole table is reproducible.
    """
    if reset is None:
        from .exchange import isometry
        from .objective import extract_reset_state

        reset = extract_reset_state(isometry(seq))
    rows = []
    children = np.random.SeedSequence(seed).spawn(len(list(sigmas)))
    for child, sigma in zip(children, sigmas):
        model = NoiseModel(sigma=float(sigma), correlation=correlation)
        chi = chi_average(
            seq, model, n_samples,
            seed=int(child.generate_state(1)[0]), rev=rev, workers=workers,
        )
        rows.append(metrics(chi, reset))
    return rows


# ---------------------------------------------------------------------------
# CSV interchange

CSV_COLUMNS = (
    "sigma", "p_L_ind", "sem_p_L_ind", "F_Q", "F_e", "one_minus_F2",
    "eps_F", "eps_5", "eps_8", "eps_L_rem", "eps_R", "n_samples", "seed",
)


def write_metrics_csv(path, rows: list[MetricSet], header_comment: str = "") -> None:
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    lines.append(",".join(CSV_COLUMNS))
    for r in rows:
        rec = [
            f"{r.sigma:.12g}", f"{r.p_L_ind:.12g}", f"{r.sem['p_L_ind']:.6g}",
            f"{r.F_Q:.12g}", f"{r.F_e:.12g}", f"{r.one_minus_F2:.12g}",
            f"{r.eps_F:.12g}", f"{r.eps_5:.12g}", f"{r.eps_8:.12g}",
            f"{r.eps_L_rem:.12g}", f"{r.eps_R:.12g}",
            str(r.n_samples), str(r.seed),
        ]
        lines.append(",".join(rec))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_metrics_csv(path) -> list[MetricSet]:
    """Read rows written by write_metrics_csv (only p_L_ind keeps its error bar)."""
    rows = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {header}")
    for ln in lines[1:]:
        f = ln.split(",")
        d = dict(zip(header, f))
        rows.append(MetricSet(
            p_L_ind=float(d["p_L_ind"]),
            F_e=float(d["F_e"]),
            F_Q=float(d["F_Q"]),
            one_minus_F2=float(d["one_minus_F2"]),
            eps_F=float(d["eps_F"]),
            eps_5=float(d["eps_5"]),
            eps_8=float(d["eps_8"]),
            eps_L_rem=float(d["eps_L_rem"]),
            eps_R=float(d["eps_R"]),
            sem={"p_L_ind": float(d["sem_p_L_ind"])},
            n_samples=int(d["n_samples"]),
            seed=int(d["seed"]),
            sigma=float(d["sigma"]),
        ))
    return rows
