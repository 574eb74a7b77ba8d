import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from conftest import PI_REF
from masprt.analysis import (
    BoundInputs,
    kl_poisson,
    maximal_isi_means,
    mu_factor,
    prop1_bound,
    prop1_coefficients,
    prop2_lhs,
    prop2_tail,
)
from masprt.channel import ChannelParams
from masprt.detectors import wald_thresholds

TH = wald_thresholds(1e-3, 1e-3)


def inputs_for(N, mem, params=None, horizon=None):
    return BoundInputs.from_params(N, mem, params or ChannelParams(), TH, horizon)


def kl_series(la, lb, kmax=2000):
    """KL divergence by direct summation of the pmf series."""
    k = np.arange(kmax)
    p = poisson.pmf(k, la)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - poisson.logpmf(k[mask], lb))))


class TestKlPoisson:
    def test_equal_means(self):
        assert kl_poisson(3.3, 3.3) == 0

    def test_reference(self):
        assert kl_poisson(2.0, 1.0) == pytest.approx(0.38629436111989062, rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(la=st.floats(0.01, 80), lb=st.floats(0.01, 80))
    def test_non_negative_and_matches_series(self, la, lb):
        d = kl_poisson(la, lb)
        assert d >= -1e-15
        assert d == pytest.approx(kl_series(la, lb), rel=1e-8, abs=1e-12)

    def test_vectorised(self):
        out = kl_poisson([1.0, 2.0], [1.0, 1.0])
        np.testing.assert_allclose(out, [0.0, 0.38629436111989062], rtol=1e-14)

    def test_rejects_zero_mean(self):
        with pytest.raises(ValueError):
            kl_poisson(0.0, 1.0)


class TestMaximalIsiMeans:
    def test_no_memory_first_sample(self, params):
        inp = BoundInputs.from_params(1, 0, params, TH)
        assert maximal_isi_means([100.0], 1, inp, 1) == pytest.approx(100 * PI_REF[0] + 0.4, rel=1e-13)
        assert maximal_isi_means([100.0], 1, inp, 0) == pytest.approx(0.4, rel=1e-13)

    def test_one_past_symbol_two_samples(self, params):
        a, b = 7.0, 3.0
        inp = BoundInputs.from_params(2, 1, params, TH)
        expected0 = PI_REF[1] * b + PI_REF[2] * a + 0.4
        assert maximal_isi_means([a, b], 1, inp, 0) == pytest.approx(expected0, rel=1e-13)
        assert maximal_isi_means([a, b], 1, inp, 1) == pytest.approx(expected0 + PI_REF[0] * a, rel=1e-13)

    def test_matches_explicit_history_sum(self, params):
        N, mem = 3, 4
        x1 = np.array([5.0, 2.0, 1.0])
        inp = inputs_for(N, mem, params)
        pi = inp.taps.taps
        for k in range(1, 2 * N + 1):
            for j in (0, 1):
                history = list(np.tile(x1, mem)) + [x1[i] * j if i < N else 0.0 for i in range(k)]
                # history[-1] is slot k of the current symbol
                expected = sum(pi[lag] * history[-1 - lag] for lag in range(len(history))) + 0.4
                assert maximal_isi_means(x1, k, inp, j) == pytest.approx(expected, rel=1e-12)

    def test_hypotheses_differ_by_signal(self, params):
        x1 = np.array([4.0, 3.0, 2.0, 1.0])
        inp = inputs_for(4, 2, params)
        lam1, lam0 = inp.means(x1)
        np.testing.assert_allclose(lam1 - lam0, inp.signal(x1), rtol=1e-12)

    def test_rejects_bad_arguments(self, params):
        inp = inputs_for(2, 1, params)
        with pytest.raises(ValueError):
            maximal_isi_means([1.0, 1.0], 0, inp, 0)
        with pytest.raises(ValueError):
            maximal_isi_means([1.0, 1.0], 1, inp, 2)
        with pytest.raises(ValueError):
            maximal_isi_means([1.0, -1.0], 1, inp, 0)


def mu_oracle(lower, upper, mean0):
    ks = [k for k in range(0, 2000) if lower < k < upper]
    return float(sum(poisson.pmf(k, mean0) for k in ks))


class TestMuFactor:
    @pytest.mark.parametrize("variant", ["printed", "derivation"])
    @pytest.mark.parametrize("x1", [[100.0], [30.0], [5.0]])
    def test_single_sample_against_pmf_sum(self, params, variant, x1):
        inp = BoundInputs.from_params(1, 0, params, TH)
        res = mu_factor(x1, inp, variant)
        assert not res.degenerate
        assert res.mu == pytest.approx(mu_oracle(res.lower, res.upper, 0.4), rel=1e-10, abs=1e-15)

    def test_printed_thresholds(self, params):
        inp = BoundInputs.from_params(1, 0, params, TH)
        res = mu_factor([100.0], inp, "printed")
        denom = math.log(100.4 / 0.4)
        assert res.lower == pytest.approx((TH.logA + 200 * PI_REF[0]) / denom, rel=1e-12)
        assert res.upper == pytest.approx((TH.logB + 200 * PI_REF[0]) / denom, rel=1e-12)

    def test_derivation_thresholds(self, params):
        inp = BoundInputs.from_params(1, 0, params, TH)
        res = mu_factor([100.0], inp, "derivation")
        s = 100 * PI_REF[0]
        denom = math.log((s + 0.4) / 0.4)
        assert res.lower == pytest.approx((TH.logA + s) / denom, rel=1e-12)
        assert res.upper == pytest.approx((TH.logB + s) / denom, rel=1e-12)

    def test_with_memory_uses_maximal_isi_mean(self, params):
        x1 = np.array([40.0, 10.0, 5.0])
        inp = inputs_for(3, 3, params)
        res = mu_factor(x1, inp)
        mean0 = maximal_isi_means(x1, 1, inp, 0)
        assert res.mu == pytest.approx(mu_oracle(res.lower, res.upper, mean0), rel=1e-10, abs=1e-15)

    def test_zero_first_rate_is_degenerate(self, params):
        res = mu_factor([0.0, 5.0], inputs_for(2, 1, params))
        assert res.degenerate and res.mu == 1.0

    def test_rejects_unknown_variant(self, params):
        with pytest.raises(ValueError):
            mu_factor([1.0], BoundInputs.from_params(1, 0, params, TH), "other")

    @settings(max_examples=40, deadline=None)
    @given(x=st.floats(0.1, 500))
    def test_is_a_probability(self, x):
        res = mu_factor([x], BoundInputs.from_params(1, 0, ChannelParams(), TH))
        assert 0 <= res.mu <= 1


def prop1_oracle(x1, pi, mu):
    N = len(x1)
    total = (pi[0] + mu * sum(pi[i] for i in range(1, N))) * x1[0]
    for k in range(1, N):
        total += mu * x1[k] * sum(pi[i] for i in range(0, N - k))
    return total


class TestProp1:
    @pytest.mark.parametrize("N", [1, 2, 5, 20])
    def test_against_double_loop(self, params, N):
        rng = np.random.default_rng(N)
        inp = inputs_for(N, 2, params)
        for mu in (0.0, 0.3, 1.0):
            x1 = rng.uniform(0, 30, N)
            assert prop1_bound(x1, inp, mu) == pytest.approx(prop1_oracle(x1, inp.taps.taps, mu), rel=1e-10)

    def test_frozen_value(self, params):
        inp = inputs_for(2, 1, params)
        # (pi1 + 0.5 pi2) * 10 + 0.5 * 4 * pi1
        expected = (PI_REF[0] + 0.5 * PI_REF[1]) * 10 + 0.5 * 4 * PI_REF[0]
        assert prop1_bound([10.0, 4.0], inp, 0.5) == pytest.approx(expected, rel=1e-13)

    def test_homogeneous_for_fixed_mu(self, params):
        inp = inputs_for(4, 2, params)
        x1 = np.array([3.0, 1.0, 2.0, 0.5])
        assert prop1_bound(2.5 * x1, inp, 0.4) == pytest.approx(2.5 * prop1_bound(x1, inp, 0.4), rel=1e-13)

    def test_zero_sequence(self, params):
        assert prop1_bound(np.zeros(3), inputs_for(3, 1, params)) == 0

    def test_coefficients_non_negative_and_increasing_in_mu(self, params):
        inp = inputs_for(6, 1, params)
        c_lo, c_hi = prop1_coefficients(inp, 0.1), prop1_coefficients(inp, 0.9)
        assert np.all(c_lo >= 0) and np.all(c_hi >= c_lo)


def prop2_oracle(j, x1, T, inp):
    total = 0.0
    for k in range(1, T + 1):
        a = maximal_isi_means(x1, k, inp, j)
        b = maximal_isi_means(x1, k, inp, 1 - j)
        total += kl_series(a, b) / k
    return total


class TestProp2:
    def test_two_term_oracle(self, params):
        x1 = np.array([20.0, 5.0])
        inp = inputs_for(2, 2, params)
        for j in (0, 1):
            assert prop2_lhs(j, x1, 2, inp) == pytest.approx(prop2_oracle(j, x1, 2, inp), rel=1e-8)

    def test_single_sample_no_memory(self, params):
        inp = BoundInputs.from_params(1, 0, params, TH)
        lam1 = 100 * PI_REF[0] + 0.4
        assert prop2_lhs(1, [100.0], 1, inp) == pytest.approx(kl_series(lam1, 0.4), rel=1e-8)
        assert prop2_lhs(0, [100.0], 1, inp) == pytest.approx(kl_series(0.4, lam1), rel=1e-8)

    def test_increasing_in_stopping_time(self, params):
        x1 = np.linspace(10, 1, 5)
        inp = inputs_for(5, 3, params)
        vals = [prop2_lhs(1, x1, T, inp) for T in range(1, 6)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rejects_zero_stopping_time(self, params):
        with pytest.raises(ValueError):
            prop2_lhs(1, [1.0], 0, BoundInputs.from_params(1, 0, params, TH))

    def test_tail_is_difference_of_partial_sums(self, params):
        x1 = np.array([30.0, 10.0, 2.0])
        inp = inputs_for(3, 2, params)
        tail = prop2_tail(0, x1, 2, 0.1, inp)
        assert tail.horizon == 12
        full = prop2_lhs(0, x1, tail.horizon, inp)
        assert tail.value == pytest.approx(full - prop2_lhs(0, x1, 2, inp), rel=1e-10)

    def test_tail_flags(self, params):
        x1 = np.array([30.0, 10.0, 2.0])
        inp = inputs_for(3, 2, params)
        assert not prop2_tail(1, x1, 1, 1e-9, inp).satisfied
        assert prop2_tail(1, x1, 1, 1e9, inp).satisfied

    def test_tail_horizon_must_exceed_stopping_time(self, params):
        inp = inputs_for(3, 2, params)
        with pytest.raises(ValueError):
            prop2_tail(1, np.ones(3), 12, 0.1, inp, horizon=12)

    def test_longer_horizon_needs_longer_taps(self, params):
        inp = inputs_for(2, 1, params)
        with pytest.raises(ValueError):
            prop2_tail(1, np.ones(2), 1, 0.1, inp, horizon=50)
        wide = inputs_for(2, 1, params, horizon=50)
        assert prop2_tail(1, np.ones(2), 1, 0.1, wide, horizon=50).horizon == 50
