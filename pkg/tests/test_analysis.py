"""Flag-probability algebra, gauge pumping and the brute-force trace-outs."""

import warnings
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rilseq.analysis import (
    FlagParams,
    GaugeParams,
    InconsistentMetricsError,
    gauge_pumping_matrix,
    gauge_stationary,
    joint_flag_table,
    leakage_coherence_traceout,
    relaxation_matrix,
    wrong_guess_given_0,
    wrong_guess_given_1,
)


def fake_metrics(p_L_ind=0.0, eps_F=0.0, eps_5=0.0, eps_8=0.0):
    return SimpleNamespace(p_L_ind=p_L_ind, eps_F=eps_F, eps_5=eps_5, eps_8=eps_8)


class TestWrongGuessGiven0:
    def test_all_zero_errors(self):
        flag = FlagParams(eps_L=0.0, eps_1S=0.0, eps_0T=0.0)
        assert wrong_guess_given_0(flag, fake_metrics()) == 0.0

    def test_worked_arithmetic(self):
        flag = FlagParams(eps_L=0.01, eps_1S=0.0, eps_0T=0.01)
        m = fake_metrics(p_L_ind=0.001, eps_5=0.02)
        expect = 0.01 * 0.001 + 0.01 * 0.01 + 0.02 * 0.01
        assert wrong_guess_given_0(flag, m) == pytest.approx(expect, rel=1e-15)
        assert expect == pytest.approx(3.1e-4)

    def test_no_input_leakage_limit(self):
        flag = FlagParams(eps_L=0.0, eps_1S=0.0, eps_0T=0.03)
        m = fake_metrics(p_L_ind=0.002, eps_5=0.05)
        assert wrong_guess_given_0(flag, m) == pytest.approx(0.03 * 0.002)

    def test_warns_outside_leading_order_regime(self):
        flag = FlagParams(eps_L=0.5, eps_1S=0.0, eps_0T=0.0)
        with pytest.warns(UserWarning, match="leading-order"):
            wrong_guess_given_0(flag, fake_metrics())


class TestWrongGuessGiven1:
    def test_no_leakage_means_every_flag_is_wrong(self):
        flag = FlagParams(eps_L=0.0, eps_1S=0.001, eps_0T=0.0)
        assert wrong_guess_given_1(flag, fake_metrics(eps_F=0.001)) == 1.0

    def test_strong_leakage_limit(self):
        flag = FlagParams(eps_L=0.2, eps_1S=1e-6, eps_0T=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = wrong_guess_given_1(flag, fake_metrics(eps_F=1e-6))
        assert v < 1e-4

    def test_balanced_point(self):
        flag = FlagParams(eps_L=0.004, eps_1S=0.001, eps_0T=0.0)
        m = fake_metrics(eps_F=0.003)
        assert wrong_guess_given_1(flag, m) == pytest.approx(0.5, rel=1e-12)

    def test_undefined_case_returns_zero_with_warning(self):
        flag = FlagParams(eps_L=0.0, eps_1S=0.0, eps_0T=0.0)
        with pytest.warns(UserWarning, match="undefined"):
            assert wrong_guess_given_1(flag, fake_metrics()) == 0.0

    @given(
        eps_l=st.floats(1e-6, 0.05),
        noise1=st.floats(1e-6, 0.05),
        noise2=st.floats(1e-6, 0.05),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_leakage_and_noise(self, eps_l, noise1, noise2):
        lo, hi = sorted((noise1, noise2))
        f_lo = FlagParams(eps_L=eps_l, eps_1S=lo, eps_0T=0.0)
        f_hi = FlagParams(eps_L=eps_l, eps_1S=hi, eps_0T=0.0)
        m = fake_metrics(eps_F=0.0)
        assert wrong_guess_given_1(f_lo, m) <= wrong_guess_given_1(f_hi, m)
        f2 = FlagParams(eps_L=min(eps_l * 2, 1.0), eps_1S=lo, eps_0T=0.0)
        assert wrong_guess_given_1(f2, m) <= wrong_guess_given_1(f_lo, m)


class TestJointTable:
    def test_ideal_channel_perfect_measurement(self):
        flag = FlagParams(eps_L=0.01, eps_1S=0.0, eps_0T=0.0)
        t = joint_flag_table(flag, fake_metrics())
        assert t.p(1, 0, 1) == pytest.approx(0.01, rel=1e-15)  # reset, flagged
        assert t.p(0, 0, 0) == pytest.approx(0.99, rel=1e-15)
        assert t.wrong_guess_given(0) == 0.0
        assert t.wrong_guess_given(1) == 0.0

    def test_marginals_sum_to_one(self, rng):
        for _ in range(25):
            flag = FlagParams(*rng.uniform(0, 0.2, 3))
            p, f5, f8 = rng.uniform(0, 0.01, 3)
            m = fake_metrics(p_L_ind=p, eps_F=p + rng.uniform(0, 0.01),
                             eps_5=f5, eps_8=f8)
            t = joint_flag_table(flag, m)
            assert t.table.sum() == pytest.approx(1.0, abs=1e-12)
            assert t.p_flag(0) + t.p_flag(1) == pytest.approx(1.0, abs=1e-12)
            assert np.all(t.table >= 0)

    def test_singlet_leaked_output_channel_is_closed(self):
        # exchange noise conserves total spin: an unleaked input can never
        # pair leaked output with a singlet ancilla
        flag = FlagParams(eps_L=0.3, eps_1S=0.2, eps_0T=0.2)
        m = fake_metrics(p_L_ind=0.05, eps_F=0.08, eps_5=0.02, eps_8=0.01)
        t = joint_flag_table(flag, m)
        # P(flag, L_out, U_in) carries only the triplet route
        assert t.p(0, 1, 0) == pytest.approx(flag.eps_0T * m.p_L_ind * 0.7, rel=1e-12)
        assert t.p(1, 1, 0) == pytest.approx((1 - flag.eps_0T) * m.p_L_ind * 0.7, rel=1e-12)

    def test_leading_order_flag_rate(self):
        flag = FlagParams(eps_L=0.004, eps_1S=0.002, eps_0T=0.001)
        m = fake_metrics(p_L_ind=0.0005, eps_F=0.003, eps_5=1e-4, eps_8=1e-4)
        t = joint_flag_table(flag, m)
        approx = flag.eps_1S + m.eps_F + flag.eps_L
        assert t.p_flag(1) == pytest.approx(approx, rel=0.02)

    def test_exact_vs_leading_order_wrong_guess(self):
        flag = FlagParams(eps_L=0.01, eps_1S=0.001, eps_0T=0.001)
        m = fake_metrics(p_L_ind=3e-4, eps_F=1.2e-3, eps_5=1e-3, eps_8=2e-4)
        t = joint_flag_table(flag, m)
        assert t.wrong_guess_given(1) == pytest.approx(
            wrong_guess_given_1(flag, m), rel=0.05
        )
        assert t.wrong_guess_given(0) == pytest.approx(
            wrong_guess_given_0(flag, m), rel=0.05
        )

    def test_inconsistent_metrics_rejected(self):
        flag = FlagParams(eps_L=0.01, eps_1S=0.0, eps_0T=0.0)
        with pytest.raises(InconsistentMetricsError):
            joint_flag_table(flag, fake_metrics(p_L_ind=0.01, eps_F=0.005))

    def test_flag_params_validated(self):
        with pytest.raises(ValueError):
            FlagParams(eps_L=1.5, eps_1S=0.0, eps_0T=0.0)


class TestGauge:
    def test_pumping_matrix_doubly_stochastic(self):
        p = gauge_pumping_matrix()
        assert np.allclose(p.sum(axis=0), 1.0)
        assert np.allclose(p.sum(axis=1), 1.0)

    @pytest.mark.parametrize("eta", [0.0, 0.2, 0.7, 1.0])
    def test_relaxation_column_stochastic(self, eta):
        r = relaxation_matrix(eta)
        assert np.allclose(r.sum(axis=0), 1.0)

    def test_eta_zero(self):
        st_ = gauge_stationary(GaugeParams(eta=0.0))
        assert st_.p_down == pytest.approx(0.5)
        assert st_.p_up == pytest.approx(0.5)
        assert st_.decay_eigenvalue == pytest.approx(-1 / 3)
        assert st_.coherence_weight == 0.0

    def test_eta_one(self):
        st_ = gauge_stationary(GaugeParams(eta=1.0))
        assert st_.p_down == pytest.approx(1.0)
        assert st_.p_up == pytest.approx(0.0)
        assert st_.decay_eigenvalue == pytest.approx(0.0)
        assert st_.coherence_weight == pytest.approx(1.0)

    def test_small_eta_weight(self):
        st_ = gauge_stationary(GaugeParams(eta=0.04))
        assert st_.coherence_weight == pytest.approx(3 * 0.04 / 3.96, rel=1e-12)
        assert st_.coherence_weight == pytest.approx(0.03, abs=4e-4)  # ~3 eta / 4

    def test_stationary_state_is_fixed_point(self, rng):
        for eta in rng.uniform(0, 1, 100):
            st_ = gauge_stationary(GaugeParams(eta=float(eta)))
            m = relaxation_matrix(eta) @ gauge_pumping_matrix()
            vec = np.array([st_.p_down, st_.p_up])
            assert np.max(np.abs(m @ vec - vec)) < 1e-12
            # decay mode
            flip = np.array([-1.0, 1.0])
            assert np.max(np.abs(m @ flip - st_.decay_eigenvalue * flip)) < 1e-12

    def test_coherence_weight_quadratic_error_vs_3eta4(self):
        etas = np.array([0.01, 0.02, 0.04])
        errs = [abs(gauge_stationary(GaugeParams(eta=e)).coherence_weight - 0.75 * e)
                for e in etas]
        # halving eta quarters the gap
        assert errs[2] / errs[1] == pytest.approx(4.0, rel=0.05)
        assert errs[1] / errs[0] == pytest.approx(4.0, rel=0.05)

    def test_eta_validation(self):
        with pytest.raises(ValueError):
            GaugeParams(eta=1.2)


class TestCoherenceTraceout:
    def test_balanced_superposition_purity(self):
        a = b = 1 / np.sqrt(2)
        res = leakage_coherence_traceout(a, b, gauge=-0.5)
        assert res.purity == pytest.approx(13 / 18, abs=1e-12)

    @pytest.mark.parametrize("gauge,sign", [(-0.5, +1.0), (+0.5, -1.0)])
    def test_coherence_ratio_is_two_thirds_with_gauge_sign(self, gauge, sign):
        res = leakage_coherence_traceout(0.6, 0.8, gauge=gauge)
        assert res.coherence_ratio == pytest.approx(sign * 2 / 3, abs=1e-12)

    def test_populations_survive_exactly(self, rng):
        a = rng.normal() + 1j * rng.normal()
        b = rng.normal() + 1j * rng.normal()
        n = np.hypot(abs(a), abs(b))
        a, b = a / n, b / n
        res = leakage_coherence_traceout(a, b)
        sig = res.rep_density
        assert sig[0, 0] == pytest.approx(abs(a) ** 2, abs=1e-12)
        assert sig[2, 2] == pytest.approx(abs(b) ** 2, abs=1e-12)
        assert abs(sig[1, 1]) < 1e-12
        assert np.trace(sig) == pytest.approx(1.0, abs=1e-12)

    def test_triplet_branch_weights(self):
        # unleaked amplitude spreads 1/3 : 2/3 over the ancilla triplet
        res = leakage_coherence_traceout(1.0, 0.0, gauge=-0.5)
        assert res.branch_weights["T0"] == pytest.approx(1 / 3, abs=1e-12)
        assert res.branch_weights["T-"] == pytest.approx(2 / 3, abs=1e-12)
        assert res.branch_weights["S"] == pytest.approx(0.0, abs=1e-12)

    def test_gauge_validation(self):
        with pytest.raises(ValueError):
            leakage_coherence_traceout(1.0, 0.0, gauge=0.0)
