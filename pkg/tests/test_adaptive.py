import math

import numpy as np
import pytest

import oracles
from sparsenorm.adaptive import (AdaptiveConfig, _q_star_dense_formula, estimate_norm_star,
                                 estimate_norm_star_eta, estimate_norm_star_eta_rho,
                                 estimate_norm_star_rho, estimate_norm_star_star, estimate_Q_star,
                                 estimate_Q_star_eta, rate_psi_star, tau_eta)
from sparsenorm.known_sigma import RateInputs, rate_psi, threshold_tau
from sparsenorm.models import make_covariance, make_signal, observe
from sparsenorm.noise import DegenerateSampleError
from sparsenorm.special import chi1_quantile, truncated_moments


def cfg(s, d, frob, eta=None, frob_corr=None):
    return AdaptiveConfig(s, np.ones(d), frob, frob_corr, eta)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(s=0), dict(frob=0.0), dict(eta=1.0), dict(eta=0.0)])
    def test_validation(self, kwargs):
        args = dict(s=1, diag=np.ones(3), frob=2.0)
        args.update(kwargs)
        with pytest.raises(ValueError):
            AdaptiveConfig(**args)

    def test_corr_norm_default(self):
        assert cfg(1, 3, 2.0).corr_norm == 2.0
        assert cfg(1, 3, 2.0, frob_corr=1.5).corr_norm == 1.5


class TestQStar:
    def test_dense_formula_with_unit_noise(self):
        assert _q_star_dense_formula(np.zeros(3), np.ones(3), 1.0) == -3.0
        assert math.sqrt(abs(_q_star_dense_formula(np.zeros(3), np.ones(3), 1.0))) == math.sqrt(3)

    def test_zero_data_is_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            estimate_Q_star(np.zeros(3), cfg(5, 3, 1.0))

    def test_dense_formula(self):
        y = np.array([0.3, -1.1, 0.7, 2.0])
        q, info = estimate_Q_star(y, cfg(5, 4, 2.0), full_output=True)
        assert info["branch"] == "dense"
        assert q == math.fsum(y * y - info["sigma_sq"])

    def test_sparse_spike(self):
        d = 10_000
        m = make_covariance("identity", d)
        sig = make_signal(d, 1, "single-spike", 100.0, (0, 0))
        c = AdaptiveConfig(1, m.diag, m.frobenius)
        qs = [estimate_Q_star(observe(sig, m, 1.0, (1, r)).y, c) for r in range(100)]
        assert all(abs(q - 1e4) <= 1e3 for q in qs)
        ns = [estimate_norm_star(observe(sig, m, 1.0, (1, r)).y, c) for r in range(100)]
        assert all(abs(n - 100) <= 5 for n in ns)

    def test_matches_literal_transcription(self):
        rng = np.random.default_rng(20)
        for _ in range(1000):
            d = int(rng.integers(1, 13))
            y = rng.standard_normal(d) * rng.choice([0.5, 2.0]) + rng.choice([0.0, 5.0]) * (
                rng.random(d) < 0.2)
            diag = rng.uniform(0.2, 1.0, d)
            s = int(rng.integers(1, 20))
            frob = float(rng.uniform(0.5, 10.0))
            config = AdaptiveConfig(s, diag, frob)
            assert estimate_Q_star(y, config) == oracles.q_star(y.tolist(), diag.tolist(), s, frob)

    def test_eta_matches_literal_transcription(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            d = int(rng.integers(1, 13))
            y = rng.standard_normal(d) * 2 + 400.0 * (rng.random(d) < 0.2)
            diag = rng.uniform(0.2, 1.0, d)
            s = int(rng.integers(1, 5))
            frob = float(rng.uniform(s, 10.0))
            eta = float(rng.uniform(0.05, 0.95))
            config = AdaptiveConfig(s, diag, frob, eta=eta)
            assert estimate_Q_star_eta(y, config) == oracles.q_star_eta(y.tolist(), diag.tolist(), s, frob, eta)

    def test_known_sigma_centering_relation(self):
        # with the true sigma plugged in, Q*'s sparse branch differs from Q_hat only through
        # the centering: sigma^2 alpha sum(diag) versus sigma^2 beta sum over kept coordinates
        rng = np.random.default_rng(22)
        for _ in range(200):
            d = 40
            y = rng.standard_normal(d) * 1.5
            diag = rng.uniform(0.3, 1.0, d)
            s, frob = 2, 6.0
            tau = threshold_tau(s, frob)
            tm = truncated_moments(tau)
            keep = np.abs(y) > np.sqrt(diag) * tau
            q_hat = math.fsum(y[keep] ** 2 - diag[keep] * tm.beta)
            q_star_true = math.fsum(y[keep] ** 2) - tm.alpha * math.fsum(diag)
            diff = q_star_true - q_hat
            assert diff == pytest.approx(tm.beta * math.fsum(diag[keep]) - tm.alpha * math.fsum(diag),
                                         abs=1e-9)


class TestEquivariance:
    KS = range(-4, 5)

    def _samples(self, n=60, d=200):
        rng = np.random.default_rng(30)
        for i in range(n):
            y = rng.standard_normal(d)
            y[:5] += 6.0
            yield y, i

    @pytest.mark.parametrize("k", KS)
    def test_norm_star(self, k):
        c = 2.0 ** (k / 2)
        for y, i in self._samples():
            config = cfg(3 if i % 2 else 60, y.size, 14.0, eta=0.3)
            fns = [estimate_norm_star, estimate_norm_star_star]
            if config.sparse:
                fns.append(estimate_norm_star_eta)
            for fn in fns:
                base, scaled = fn(y, config), fn(c * y, config)
                if k % 2 == 0:
                    assert scaled == c * base
                else:
                    assert scaled == pytest.approx(c * base, rel=1e-13, abs=1e-300)

    @pytest.mark.parametrize("k", KS)
    def test_threshold_shift(self, k):
        c = 2.0 ** (k / 2)
        for y, i in self._samples(20):
            config = cfg(3, y.size, 14.0)
            _, a = estimate_Q_star(y, config, full_output=True)
            _, b = estimate_Q_star(c * y, config, full_output=True)
            assert b["t_hat"] == 2.0 ** k * a["t_hat"]


class TestEtaVariant:
    def test_tau_ratio(self):
        ratio = tau_eta(5, 20.0, 0.5) / threshold_tau(5, 20.0)
        assert ratio == pytest.approx(71.523518204600429763, rel=1e-12)

    def test_requires_eta_and_sparse(self):
        y = np.linspace(-2, 2, 20)
        with pytest.raises(ValueError):
            estimate_Q_star_eta(y, cfg(2, 20, 5.0))
        with pytest.raises(ValueError):
            estimate_Q_star_eta(y, cfg(10, 20, 5.0, eta=0.2))

    def test_max_collapse(self):
        rng = np.random.default_rng(40)
        y = rng.standard_normal(500)
        y[:3] = 2000.0
        config = cfg(3, 500, 22.0, eta=0.4)
        q, info = estimate_Q_star_eta(y, config, full_output=True)
        assert info["sigma_sq_eta"] <= info["sigma_sq"]
        t = tau_eta(3, 22.0, 0.4)
        keep = np.abs(y) > math.sqrt(info["sigma_sq"]) * t
        expected = math.fsum(y[keep] ** 2) - info["sigma_sq"] * truncated_moments(t).alpha * 500
        assert q == expected

    def test_zero_signal_bounded(self):
        d = 10_000
        m = make_covariance("identity", d)
        zero = make_signal(d, 0, "flat", 0.0, (0, 0))
        config = AdaptiveConfig(10, m.diag, m.frobenius, eta=0.2)
        psi = rate_psi_star(10, m.frobenius)
        vals = [abs(estimate_Q_star_eta(observe(zero, m, 1.0, (2, r)).y, config)) for r in range(100)]
        # the inflated threshold keeps every pure-noise coordinate out
        assert np.mean(np.array(vals) <= psi) >= 0.8


class TestSelector:
    def test_star_star_routes(self):
        rng = np.random.default_rng(50)
        y = rng.standard_normal(100)
        dense = cfg(20, 100, 10.0, eta=0.2)
        sparse = cfg(10, 100, 10.0, eta=0.2)
        assert estimate_norm_star_star(y, dense) == estimate_norm_star(y, dense)
        assert estimate_norm_star_star(y, sparse) == estimate_norm_star_eta(y, sparse)
        assert estimate_norm_star_star(y, sparse, full_output=True)[1]["selected"] == "star-eta"

    def test_rho_variants(self):
        rng = np.random.default_rng(51)
        y = rng.standard_normal(100)
        c = cfg(4, 100, 10.0, eta=0.3)
        assert estimate_norm_star_rho(y, c, 10.0) == estimate_norm_star(y, c)
        assert estimate_norm_star_eta_rho(y, c, 10.0) == estimate_norm_star_eta(y, c)
        assert estimate_norm_star_rho(y, c, 3.0, full_output=True)[1]["branch"] == "dense"
        _, small = estimate_norm_star_rho(y, c, 10.0, full_output=True)
        _, big = estimate_norm_star_rho(y, c, 100.0, full_output=True)
        assert big["tau"] > small["tau"]


class TestRatePsiStar:
    def test_values(self):
        assert rate_psi_star(3, 10.0) == rate_psi(RateInputs(3, 100, 10.0))
        assert rate_psi_star(100, 10.0) == pytest.approx(100 / math.log(10), rel=1e-15)
        assert rate_psi_star(12, 10.0) == 12.0

    def test_quantile_constants(self):
        assert chi1_quantile(1 - 0.5 / 20) == pytest.approx(5.0238861873148889562, rel=1e-13)
