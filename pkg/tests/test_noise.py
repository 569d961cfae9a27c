import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from sparsenorm.models import make_covariance, make_signal, observe
from sparsenorm.noise import (DegenerateSampleError, NormalizedSample, cosine_moment,
                              dyadic_threshold, empirical_cdf_sq, median_order_statistic,
                              rate_psi_tilde, sigma_sq_D, sigma_sq_eta, sigma_sq_S, sigma_sq_S_at,
                              sigma_tilde_sq_D)
from sparsenorm.special import chi1_quantile


def from_squares(squares):
    return NormalizedSample.from_normalized(np.sqrt(np.asarray(squares, dtype=float)))


class TestEmpiricalCdf:
    def test_counts(self):
        smp = from_squares([1, 4, 9])
        assert empirical_cdf_sq(smp, 4.0) == 2 / 3
        assert empirical_cdf_sq(smp, 0.5) == 0.0
        assert empirical_cdf_sq(smp, 9.0) == 1.0


class TestDyadicThreshold:
    @pytest.mark.parametrize("squares,m,t", [
        ([0.3, 0.9, 2.0], 0.9, 1.0),
        ([4, 4, 4], 4.0, 4.0),
        ([0.6, 5, 7], 5.0, 8.0),
    ])
    def test_examples(self, squares, m, t):
        smp = from_squares(squares)
        assert median_order_statistic(smp) == pytest.approx(m, rel=1e-15)
        assert dyadic_threshold(smp) == t

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            dyadic_threshold(from_squares([0, 0, 1]))

    def test_closed_form_matches_grid_search(self):
        rng = np.random.default_rng(10)
        for _ in range(10_000):
            d = int(rng.integers(1, 30))
            y = rng.standard_normal(d) * 10.0 ** rng.uniform(-3, 3)
            smp = NormalizedSample.from_normalized(y)
            if median_order_statistic(smp) == 0.0:
                continue
            assert dyadic_threshold(smp) == oracles.t_hat_grid(smp.y_tilde_sq_sorted.tolist())

    @given(hnp.arrays(float, st.integers(1, 50), elements=st.floats(1e-150, 1e150)))
    def test_grid_search_property(self, y):
        smp = NormalizedSample.from_normalized(y)
        assert dyadic_threshold(smp) == oracles.t_hat_grid(smp.y_tilde_sq_sorted.tolist())


class TestSigmaS:
    def test_at_fixed_threshold(self):
        smp = from_squares([1, 4, 9])
        est = sigma_sq_S_at(smp, 1.0)
        assert est.f_hat_at_t == pytest.approx(1 / 3)
        assert est.value == pytest.approx(1 / 0.18552600635835859262, rel=1e-13)
        assert sigma_sq_S_at(smp, 0.5).value == math.inf
        assert sigma_sq_S_at(smp, 0.5).sentinel
        assert sigma_sq_S_at(smp, 9.0).value == 0.0

    def test_example(self):
        est = sigma_sq_S(from_squares([0.3, 0.9, 2.0]))
        assert est.t_hat == 1.0 and est.f_hat_at_t == pytest.approx(2 / 3)
        assert est.value == pytest.approx(1 / 0.93590448655866777061, rel=1e-13)

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            sigma_sq_S_at(from_squares([1.0]), 0.0)

    @given(hnp.arrays(float, st.integers(2, 40), elements=st.floats(1e-3, 1e3)), st.integers(-2, 2))
    def test_even_power_equivariance_exact(self, y, j):
        # scaling by 2**j = 2**(k/2) with k = 2j even is exact in binary64
        smp = NormalizedSample.from_normalized(y)
        scaled = NormalizedSample.from_normalized(y * 2.0 ** j)
        assert dyadic_threshold(scaled) == 4.0 ** j * dyadic_threshold(smp)
        assert sigma_sq_S(scaled).value == 4.0 ** j * sigma_sq_S(smp).value

    def test_consistency_identity(self):
        m = make_covariance("identity", 10_000)
        zero = make_signal(10_000, 0, "flat", 0.0, (0, 0))
        errs = [abs(sigma_sq_S(NormalizedSample.from_normalized(observe(zero, m, 1.0, (5, r)).y)).value - 1)
                for r in range(200)]
        assert np.mean(errs) <= 0.05


class TestCosineAndD:
    def test_cosine_moment(self):
        assert cosine_moment(NormalizedSample.from_normalized(np.zeros(4)), 1.0) == 1.0
        assert cosine_moment(NormalizedSample.from_normalized([math.pi, 0.0]), 1.0) == 0.0
        smp = NormalizedSample.from_normalized(np.linspace(-50, 50, 11))
        assert abs(cosine_moment(smp, 1e-12) - 1.0) <= 1e-20
        with pytest.raises(ValueError):
            cosine_moment(smp, 0.0)

    def test_tilde_inversion(self):
        lam, t = 0.4, 2.0
        assert sigma_tilde_sq_D(t, lam, math.exp(-lam / 2)) == pytest.approx(t, rel=1e-15)
        assert sigma_tilde_sq_D(t, lam, 1.0) == 0.0
        assert math.copysign(1.0, sigma_tilde_sq_D(t, lam, 1.0)) == 1.0
        assert sigma_tilde_sq_D(t, lam, 0.0) == math.inf

    def test_cap_at_twice_S(self):
        smp = NormalizedSample.from_normalized([math.pi * 4, 0.1, 0.2, 0.3, 10.0])
        est = sigma_sq_D(smp, 10, 1.0)
        assert est.value <= 2 * est.extra["sigma_sq_S"]
        assert est.value == min(est.extra["sigma_tilde_sq_D"], 2 * est.extra["sigma_sq_S"])

    def test_lambda_floor(self):
        smp = NormalizedSample.from_normalized(np.linspace(0.1, 2, 20))
        assert sigma_sq_D(smp, 2, 5.0).extra["lambda"] == 1 / 6
        assert sigma_sq_D(smp, 500, 10.0).extra["lambda"] == pytest.approx(math.log(50) / 6)

    def test_matches_literal_transcription(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            d = int(rng.integers(1, 13))
            y = rng.standard_normal(d) * 2.0
            diag = rng.uniform(0.2, 1.0, d)
            s = int(rng.integers(1, 40))
            fc = float(rng.uniform(0.5, 5.0))
            smp = NormalizedSample.from_observation(y, diag)
            assert sigma_sq_D(smp, s, fc).value == oracles.sigma_sq_D(y.tolist(), diag.tolist(), s, fc)

    def test_dense_regime_accuracy(self):
        d = 10_000
        m = make_covariance("identity", d)
        zero = make_signal(d, 0, "flat", 0.0, (0, 0))
        s = d // 200
        errs = [abs(sigma_sq_D(NormalizedSample.from_normalized(observe(zero, m, 1.0, (6, r)).y), s,
                               m.frobenius_corr).value - 1) for r in range(200)]
        rate = s / (d * max(1.0, math.log(s / 100))) + 100 / d
        assert np.mean(errs) <= 10 * rate


class TestSigmaEta:
    def test_example(self):
        est = sigma_sq_eta(from_squares([0.3, 0.9, 2.0]), 0.5)
        assert est.extra["median"] == pytest.approx(0.9)
        assert est.value == pytest.approx(0.9 / 5.0238861873148889562, rel=1e-13)

    def test_constant_sample(self):
        est = sigma_sq_eta(from_squares([2.5] * 7), 0.3)
        assert est.value == pytest.approx(2.5 / chi1_quantile(1 - 0.3 / 20), rel=1e-15)

    def test_limit_eta_one(self):
        est = sigma_sq_eta(from_squares([1.0, 2.0]), 1 - 1e-12)
        assert est.extra["quantile"] == pytest.approx(chi1_quantile(0.95), rel=1e-10)

    @pytest.mark.parametrize("eta", [0.0, 1.0, -0.5])
    def test_domain(self, eta):
        with pytest.raises(ValueError):
            sigma_sq_eta(from_squares([1.0]), eta)


class TestRatePsiTilde:
    def test_values(self):
        assert rate_psi_tilde(1, 100, 10.0) == 0.1
        assert rate_psi_tilde(50, 100, 10.0) == pytest.approx(50 / (100 * math.log(5)))
        assert rate_psi_tilde(10, 100, 10.0) == 0.1


class TestNormalizedSample:
    def test_rejects_zero_variance(self):
        with pytest.raises(ValueError):
            NormalizedSample.from_observation([1.0, 2.0], [1.0, 0.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            NormalizedSample.from_normalized([1.0, math.nan])
        with pytest.raises(ValueError):
            NormalizedSample.from_normalized([])
