"""Global search for reset-if-leaked sequences: basin hopping over BFGS descents.

Each restart runs an independent basin-hopping chain (default parameters:
temperature 1e-5, step size 2*pi, 100 hops, step-size adaptation every 50)
over the active angles of a fixed layout, with the two QA output angles
appended for unflaggable searches. Downhill steps use BFGS with batched
central-difference gradients. Every local minimum below the success threshold
is recorded, deduplicated and re-verifiable from its stored angles alone.

Restart r of a search seeded with s draws from the RNG stream
SeedSequence(s, spawn_key=(r,)), so catalogs are reproducible and restarts
can run concurrently without sharing state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import basinhopping, minimize

from .exchange import ExchangeSequence, isometry
from .objective import (
    QaReversal,
    ResetState,
    RilSpec,
    SequenceObjective,
    bloch_distance,
    extract_qubit_gate,
    extract_reset_state,
    gate_penalty,
    identity_distance,
    total_residual,
)
from . import exchange


class SearchAbort(RuntimeError):
    """Local descent hit a non-finite objective value."""


@dataclass(frozen=True)
class SearchConfig:
    """Basin-hopping search configuration; defaults follow the reference setup."""

    mask: np.ndarray = field(default_factory=lambda: exchange.RIL14_MASK.copy())
    spec: RilSpec = RilSpec(flaggable=False, gate_constraint="identity")
    seed: int = 0
    temperature: float = 1e-5
    stepsize: float = 2 * np.pi
    iterations: int = 100
    interval: int = 50
    success_threshold: float = 1e-9
    max_restarts: int = 20
    stop_when: int | None = None  # stop after this many records (None: run all)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    def to_jsonable(self) -> dict:
        d = {
            "mask": [bool(b) for b in self.mask],
            "flaggable": self.spec.flaggable,
            "gate_constraint": self.spec.gate_constraint,
            "seed": self.seed,
            "temperature": self.temperature,
            "stepsize": self.stepsize,
            "iterations": self.iterations,
            "interval": self.interval,
            "success_threshold": self.success_threshold,
            "max_restarts": self.max_restarts,
            "stop_when": self.stop_when,
        }
        return d


@dataclass(frozen=True)
class SolutionRecord:
    """One verified search hit: angles, read-out quantities and provenance."""

    angles: np.ndarray = field(repr=False)  # radians, normalized to [0, 2*pi)
    mask: np.ndarray = field(repr=False)
    rev: QaReversal | None
    f_total: float
    reset: ResetState
    gate_distance: float
    flaggable: bool
    seed: int
    run: int
    iteration: int

    def sequence(self, name: str = "") -> ExchangeSequence:
        return ExchangeSequence(angles=self.angles, mask=self.mask, name=name)


def _central_diff_jac(fun, step: float = 1e-7):
    def jac(x):
        n = len(x)
        g = np.empty(n)
        for i in range(n):
            xp, xm = x.copy(), x.copy()
            xp[i] += step
            xm[i] -= step
            g[i] = (fun(xp) - fun(xm)) / (2 * step)
        return g

    return jac


def local_minimize(fun, x0, jac=None, gtol: float = 1e-8, maxiter: int = 1000):
    """Quasi-Newton descent to a point of (finite-difference) gradient norm < gtol.

    ``jac`` defaults to central differences with step 1e-7 on ``fun``. The
    returned value never exceeds f(x0). Raises SearchAbort on non-finite
    objective values.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = fun(x0)
    if not np.isfinite(f0):
        raise SearchAbort(f"objective is non-finite at the start point (f={f0})")
    if jac is None:
        jac = _central_diff_jac(fun)
    res = minimize(
        fun, x0, jac=jac, method="BFGS", options=dict(gtol=gtol, maxiter=maxiter)
    )
    if not np.isfinite(res.fun):
        raise SearchAbort(f"objective became non-finite during descent (f={res.fun})")
    if res.fun <= f0:
        return res.x, float(res.fun)
    return x0, float(f0)


def _make_record(obj: SequenceObjective, cfg: SearchConfig, x: np.ndarray,
                 run: int, iteration: int) -> SolutionRecord:
    seq = obj.sequence_from(x).normalized()
    rev = obj.reversal_from(x)
    f = total_residual(seq, rev, cfg.spec)
    iso = isometry(seq)
    reset = extract_reset_state(iso)
    gate = extract_qubit_gate(iso, rev)
    if cfg.spec.gate_constraint != "none":
        gdist = gate_penalty(gate, cfg.spec.gate_constraint)
    else:
        gdist = identity_distance(gate)
    return SolutionRecord(
        angles=seq.angles,
        mask=seq.mask.copy(),
        rev=None if cfg.spec.flaggable else rev,
        f_total=float(f),
        reset=reset,
        gate_distance=float(gdist),
        flaggable=cfg.spec.flaggable,
        seed=cfg.seed,
        run=run,
        iteration=iteration,
    )


def _run_chain(cfg: SearchConfig, run: int) -> list[SolutionRecord]:
    obj = SequenceObjective(cfg.mask, cfg.spec)
    if obj.n_angles == 0:
        return []
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(run,)))
    x0 = rng.uniform(0.0, 2 * np.pi, size=obj.n_params)
    records: list[SolutionRecord] = []
    hop = [0]

    def collect(x, f, accept):
        hop[0] += 1
        if f < cfg.success_threshold:
            records.append(_make_record(obj, cfg, np.asarray(x), run, hop[0]))

    basinhopping(
        obj,
        x0,
        niter=cfg.iterations,
        T=cfg.temperature,
        stepsize=cfg.stepsize,
        interval=cfg.interval,
        minimizer_kwargs=dict(
            method="BFGS", jac=obj.gradient, options=dict(gtol=1e-8, maxiter=400)
        ),
        callback=collect,
        rng=rng,
    )
    return records


def dedup(records: list[SolutionRecord], angle_tol: float = 1e-6,
          bloch_tol: float = 1e-6) -> list[SolutionRecord]:
    """Collapse records equal up to 2*pi angle periodicity and reset state.

    Two records are duplicates when every angle difference mod 2*pi is below
    ``angle_tol`` and their reset states are within ``bloch_tol`` on the Bloch
    sphere; the lowest-residual representative survives. This equivalence rule
    is a choice of this implementation; distinct-solution counts depend on it.
    """
    kept: list[SolutionRecord] = []
    for rec in sorted(records, key=lambda r: r.f_total):
        dup = False
        for ref in kept:
            d = np.abs(rec.angles - ref.angles) % (2 * np.pi)
            d = np.minimum(d, 2 * np.pi - d)
            if np.all(d < angle_tol) and bloch_distance(rec.reset, ref.reset) < bloch_tol:
                dup = True
                break
        if not dup:
            kept.append(rec)
    kept.sort(key=lambda r: (r.run, r.iteration))
    return kept


def basin_hop(cfg: SearchConfig) -> list[SolutionRecord]:
    """Run up to cfg.max_restarts independent chains and return deduplicated hits.

    Deterministic for a fixed config (seed included). With ``stop_when`` set,
    restarts stop as soon as that many deduplicated records exist.
    """
    found: list[SolutionRecord] = []
    for run in range(cfg.max_restarts):
        found.extend(_run_chain(cfg, run))
        if cfg.stop_when is not None and len(dedup(found)) >= cfg.stop_when:
            break
    return dedup(found)


# ---------------------------------------------------------------------------
# catalog persistence (angles in units of pi, 12 significant digits)


def _rec_to_json(rec: SolutionRecord) -> dict:
    return {
        "angles_pi": [float(f"{a / np.pi:.12g}") for a in rec.angles],
        "mask": [bool(b) for b in rec.mask],
        "rev": None if rec.rev is None else {"phi": rec.rev.phi, "gamma": rec.rev.gamma},
        "f_total": rec.f_total,
        "reset": {
            "alpha": [rec.reset.alpha.real, rec.reset.alpha.imag],
            "beta": [rec.reset.beta.real, rec.reset.beta.imag],
            "theta_bloch": rec.reset.theta_bloch,
            "phi_bloch": rec.reset.phi_bloch,
        },
        "gate_distance": rec.gate_distance,
        "flaggable": rec.flaggable,
        "provenance": {"seed": rec.seed, "run": rec.run, "iteration": rec.iteration},
    }


def _rec_from_json(d: dict) -> SolutionRecord:
    reset = ResetState(
        alpha=complex(*d["reset"]["alpha"]),
        beta=complex(*d["reset"]["beta"]),
        theta_bloch=d["reset"]["theta_bloch"],
        phi_bloch=d["reset"]["phi_bloch"],
    )
    rev = d.get("rev")
    return SolutionRecord(
        angles=np.asarray(d["angles_pi"], dtype=float) * np.pi,
        mask=np.asarray(d["mask"], dtype=bool),
        rev=None if rev is None else QaReversal(rev["phi"], rev["gamma"]),
        f_total=d["f_total"],
        reset=reset,
        gate_distance=d["gate_distance"],
        flaggable=d["flaggable"],
        seed=d["provenance"]["seed"],
        run=d["provenance"]["run"],
        iteration=d["provenance"]["iteration"],
    )


def save_catalog(records: list[SolutionRecord], path, config: SearchConfig | None = None,
                 extra: dict | None = None) -> None:
    doc = {"records": [_rec_to_json(r) for r in records]}
    if config is not None:
        doc["config"] = config.to_jsonable()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_catalog(path) -> list[SolutionRecord]:
    doc = json.loads(Path(path).read_text())
    return [_rec_from_json(d) for d in doc["records"]]


def census_search(cfg: SearchConfig, out_path, checkpoint_every: int = 5,
                  progress=None) -> list[SolutionRecord]:
    """Long-running variant: checkpoint the deduplicated catalog as it grows.

    Resumes from an existing checkpoint at ``out_path`` (matching config) and
    runs chains until cfg.max_restarts, writing the catalog every
    ``checkpoint_every`` chains. Exhausting a solution census needs far more
    restarts than the default search and is intentionally unbounded here.
    """
    out_path = Path(out_path)
    found: list[SolutionRecord] = []
    start_run = 0
    if out_path.exists():
        doc = json.loads(out_path.read_text())
        if doc.get("config") == cfg.to_jsonable():
            found = [_rec_from_json(d) for d in doc["records"]]
            start_run = int(doc.get("next_run", 0))
    t0 = time.time()
    for run in range(start_run, cfg.max_restarts):
        found = dedup(found + _run_chain(cfg, run))
        if progress is not None:
            progress(run=run, n_records=len(found), elapsed=time.time() - t0)
        if (run + 1) % checkpoint_every == 0 or run == cfg.max_restarts - 1:
            save_catalog(found, out_path, config=cfg, extra={"next_run": run + 1})
    return found
