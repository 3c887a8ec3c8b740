"""Local descent, basin hopping, deduplication and catalog persistence."""

import numpy as np
import pytest

from rilseq.exchange import RIL14_MASK
from rilseq.objective import RilSpec, SequenceObjective, total_residual
from rilseq.search import (
    SearchAbort,
    SearchConfig,
    SolutionRecord,
    basin_hop,
    dedup,
    load_catalog,
    local_minimize,
    save_catalog,
    _make_record,
    _run_chain,
)

SPEC_UNFLAGGED = RilSpec(flaggable=False, gate_constraint="identity")


def small_config(**kw):
    base = dict(
        mask=RIL14_MASK.copy(),
        spec=SPEC_UNFLAGGED,
        seed=1000,
        iterations=8,
        max_restarts=2,
        success_threshold=1e-9,
    )
    base.update(kw)
    return SearchConfig(**base)


class TestLocalMinimize:
    def test_convex_quadratic(self):
        fun = lambda x: float(np.sum((x - 1.0) ** 2))
        x, f = local_minimize(fun, np.zeros(6))
        assert f < 1e-16
        assert np.max(np.abs(x - 1)) < 1e-8

    def test_never_worse_than_start(self, rng):
        fun = lambda x: float(np.sum(np.cos(x) + x ** 2 / 10))
        x0 = rng.uniform(-3, 3, 4)
        _, f = local_minimize(fun, x0)
        assert f <= fun(x0)

    def test_nonfinite_objective_aborts(self):
        with pytest.raises(SearchAbort):
            local_minimize(lambda x: float("nan"), np.zeros(2))

    def test_reconverges_to_known_zero(self, no_flag, no_flag_rev, rng):
        obj = SequenceObjective(no_flag.mask, SPEC_UNFLAGGED)
        x_star = np.concatenate([
            no_flag.angles[no_flag.mask],
            [no_flag_rev.phi, no_flag_rev.gamma],
        ])
        x0 = x_star + rng.uniform(-0.01, 0.01, obj.n_params) * np.pi
        x, f = local_minimize(obj, x0, jac=obj.gradient)
        assert f < 1e-12


class TestBasinHop:
    def test_empty_mask_finds_nothing(self):
        cfg = small_config(mask=np.zeros(20, dtype=bool), max_restarts=1)
        assert basin_hop(cfg) == []

    def test_deterministic_catalog(self, tmp_path):
        cfg = small_config(stop_when=1, max_restarts=3)
        rec1 = basin_hop(cfg)
        rec2 = basin_hop(cfg)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_catalog(rec1, p1, config=cfg)
        save_catalog(rec2, p2, config=cfg)
        assert p1.read_text() == p2.read_text()

    def test_finds_solutions_and_records_verify(self):
        cfg = small_config(iterations=25, stop_when=1, max_restarts=5)
        records = basin_hop(cfg)
        assert records, "search found nothing; seed or machinery regressed"
        for rec in records:
            assert rec.f_total < cfg.success_threshold
            assert not rec.flaggable and rec.rev is not None
            # re-verification from the stored angles alone
            f = total_residual(rec.sequence(), rec.rev, cfg.spec)
            assert f < cfg.success_threshold
            assert np.all(rec.angles >= 0) and np.all(rec.angles < 2 * np.pi)
            assert abs(abs(rec.reset.alpha) ** 2 + abs(rec.reset.beta) ** 2 - 1) < 1e-9


class TestDedup:
    def _record_pair(self):
        cfg = small_config(iterations=25, stop_when=1, max_restarts=5)
        recs = basin_hop(cfg)
        assert recs
        return cfg, recs[0]

    def test_two_pi_shift_is_merged(self):
        cfg, rec = self._record_pair()
        shifted_angles = rec.angles.copy()
        active = np.flatnonzero(rec.mask)
        shifted_angles[active[0]] += 2 * np.pi
        obj = SequenceObjective(rec.mask, cfg.spec)
        x = np.concatenate([shifted_angles[rec.mask], [rec.rev.phi, rec.rev.gamma]])
        twin = _make_record(obj, cfg, x, run=9, iteration=9)
        merged = dedup([rec, twin])
        assert len(merged) == 1

    def test_distinct_reset_states_are_kept(self):
        cfg, rec = self._record_pair()
        other = SolutionRecord(
            angles=(rec.angles + 0.7) % (2 * np.pi),
            mask=rec.mask,
            rev=rec.rev,
            f_total=rec.f_total,
            reset=type(rec.reset)(alpha=0.6, beta=0.8, theta_bloch=1.85, phi_bloch=0.0),
            gate_distance=rec.gate_distance,
            flaggable=False,
            seed=1,
            run=1,
            iteration=1,
        )
        assert len(dedup([rec, other])) == 2

    def test_reconverged_duplicate_is_merged(self, rng):
        # the solution set is locally a continuous family (flat descent
        # directions), so reconvergence drifts by about the perturbation
        # scale; duplicates in the dedup sense need starts within tolerance
        cfg, rec = self._record_pair()
        obj = SequenceObjective(rec.mask, cfg.spec)
        x_star = np.concatenate([rec.angles[rec.mask], [rec.rev.phi, rec.rev.gamma]])
        merged_in = []
        for _ in range(2):
            x0 = x_star + rng.uniform(-1e-7, 1e-7, obj.n_params)
            x, f = local_minimize(obj, x0, jac=obj.gradient)
            assert f < 1e-9
            merged_in.append(_make_record(obj, cfg, x, run=5, iteration=0))
        assert len(dedup([rec, *merged_in])) == 1

    def test_keeps_lowest_residual_representative(self):
        cfg, rec = self._record_pair()
        worse = SolutionRecord(
            angles=rec.angles, mask=rec.mask, rev=rec.rev,
            f_total=rec.f_total * 10 + 1e-12, reset=rec.reset,
            gate_distance=rec.gate_distance, flaggable=False,
            seed=2, run=2, iteration=2,
        )
        out = dedup([worse, rec])
        assert len(out) == 1
        assert out[0].f_total == rec.f_total


class TestCatalog:
    def test_round_trip(self, tmp_path):
        cfg = small_config(iterations=25, stop_when=1, max_restarts=5)
        records = basin_hop(cfg)
        path = tmp_path / "catalog.json"
        save_catalog(records, path, config=cfg)
        back = load_catalog(path)
        assert len(back) == len(records)
        for a, b in zip(records, back):
            assert np.allclose(a.angles, b.angles, atol=1e-11)
            assert a.flaggable == b.flaggable
            assert a.run == b.run and a.iteration == b.iteration
            f = total_residual(b.sequence(), b.rev, cfg.spec)
            assert f < 1e-9


class TestCensus:
    def test_checkpointing_and_resume(self, tmp_path):
        from rilseq.search import census_search, load_catalog

        cfg = small_config(iterations=25, max_restarts=2)
        out = tmp_path / "census.json"
        seen = []
        census_search(cfg, out, checkpoint_every=1,
                      progress=lambda run, n_records, elapsed: seen.append(run))
        assert seen == [0, 1]
        full = load_catalog(out)
        # a fresh run with the same config resumes from the checkpoint and
        # leaves the catalog unchanged
        seen.clear()
        census_search(cfg, out, checkpoint_every=1,
                      progress=lambda run, n_records, elapsed: seen.append(run))
        assert seen == []
        assert len(load_catalog(out)) == len(full)
        # extending the restart budget picks up where it stopped
        cfg3 = small_config(iterations=25, max_restarts=3)
        # different config: starts over rather than resuming a mismatch
        census_search(cfg3, tmp_path / "census3.json", checkpoint_every=2)


def test_chain_rng_streams_are_independent():
    cfg = small_config(iterations=3, max_restarts=2)
    a = _run_chain(cfg, 0)
    b = _run_chain(cfg, 1)
    # different run indices explore different start points; just demand the
    # runs are reproducible individually
    a2 = _run_chain(cfg, 0)
    assert len(a) == len(a2)
    for r1, r2 in zip(a, a2):
        assert np.allclose(r1.angles, r2.angles, atol=0)
