import csv
import io
import json
import math

import pytest

from sparsenorm.config import (ConfigParseError, ConfigValidationError,
                               parse_config_text, split_list)
from sparsenorm.harness import (CSV_COLUMNS, cell_rate, make_estimator, rate_curve, rate_curve_svg,
                                run_experiment, summaries_to_csv, summaries_to_json)
from sparsenorm.identities import (cosine_covariance_exact, lemma_cdf, lemma_cosine, lemma_square,
                                   lemma_truncated, prop_square, verify_identities)
from sparsenorm.known_sigma import rate_phi, rate_phi_star
from sparsenorm.models import make_covariance, parse_family

BASIC = """
# minimal experiment
experiment_id = t1
estimator = n-hat
seed = 7
replications = 40
grid.d = 200
grid.s = 2, 30
grid.sigma = 1, 2.5
grid.family = identity, blockones(5,8)
grid.norm2_scale = 0, 3
"""


def cfg(text=BASIC, **over):
    c = parse_config_text(text)
    for k, v in over.items():
        setattr(c, k, v)
    return c.validate()


class TestConfig:
    def test_parse(self):
        c = cfg()
        assert c.s == [2, 30] and c.sigma == [1.0, 2.5]
        assert c.family == ["identity", "blockones(5,8)"]
        assert c.norm2 is None and c.norm2_scale == [0.0, 3.0]

    def test_split_list(self):
        assert split_list("a, b(1,2) ,c") == ["a", "b(1,2)", "c"]
        assert split_list(" ") == []

    @pytest.mark.parametrize("text", ["grid.d 10", "bogus = 1", "seed = 1\nseed = 2", "seed = 1.5",
                                      "grid.s = ,"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigParseError):
            parse_config_text(text)

    @pytest.mark.parametrize("text", ["estimator = n-nope", "estimator = n-star-eta",
                                      "estimator = n-tilde", "replications = 0", "grid.sigma = 0",
                                      "grid.norm2 = 1\ngrid.norm2_scale = 1", "grid.norm2 = -1",
                                      "estimator = n-star-star\nestimator.eta = 1.5"])
    def test_validation_errors(self, text):
        with pytest.raises(ConfigValidationError):
            parse_config_text(text).validate()

    def test_default_target_zero(self):
        assert parse_config_text("").validate().norm2 == [0.0]


class TestRates:
    @pytest.mark.parametrize("estimator", ["n-hat", "n-star", "n-star-star", "n-tilde", "n-star-rho"])
    def test_rate_matches_rate_module(self, estimator):
        m = make_covariance("ar1", 300, rho=0.4)
        name, value = cell_rate(estimator, 20, m, rho=50.0)
        expected = {"psi": rate_phi(20, m.frobenius ** 2), "psi_star": rate_phi_star(20, m.frobenius ** 2),
                    "phi_rho": rate_phi(20, 2500.0), "phi_star_rho": rate_phi_star(20, 2500.0)}[name]
        assert value == expected

    def test_summaries_carry_exact_rate(self):
        for r in run_experiment(cfg(replications=5)):
            model = parse_family(r.family, r.d)
            assert (r.rate_name, r.rate_value) == cell_rate("n-hat", r.s, model)
            assert r.scaled_risk == r.mean_sq_err / (r.sigma ** 2 * r.rate_value)

    def test_eta_required(self):
        with pytest.raises(ValueError):
            make_estimator("n-star-eta", make_covariance("identity", 5), 1.0, 1)


class TestRunExperiment:
    def test_grid_order_and_columns(self):
        rows = run_experiment(cfg())
        assert len(rows) == 2 * 2 * 2 * 2
        assert [(r.family, r.s, r.sigma) for r in rows[:4]] == [
            ("identity", 2, 1.0), ("identity", 2, 1.0), ("identity", 2, 2.5), ("identity", 2, 2.5)]
        text = summaries_to_csv(rows)
        parsed = list(csv.reader(io.StringIO(text)))
        assert tuple(parsed[0]) == CSV_COLUMNS
        assert len(parsed) == 17
        assert parsed[9][CSV_COLUMNS.index("family_params")] == "r=5;p=8"

    def test_norm_scale_target(self):
        rows = run_experiment(cfg())
        for r in rows:
            assert r.norm2_target in (0.0, pytest.approx(3 * r.sigma * math.sqrt(r.rate_value), rel=1e-14))

    def test_noise_free_dense_limit(self):
        text = "grid.d = 50\ngrid.s = 40\ngrid.sigma = 1e-6\ngrid.norm2 = 3\nreplications = 1\n"
        (r,) = run_experiment(cfg(text))
        # dense branch: sqrt(|theta|^2 + O(sigma)) -> 3, up to the sigma^2 d centering
        expected = (math.sqrt(abs(9.0 - 1e-12 * 50)) - 3.0) ** 2
        assert r.mean_sq_err == pytest.approx(expected, abs=1e-10)

    def test_thread_determinism(self):
        c = cfg()
        a = run_experiment(c, threads=1)
        b = run_experiment(c, threads=4)
        assert summaries_to_csv(a) == summaries_to_csv(b)
        assert summaries_to_json(a, c) == summaries_to_json(b, c)

    def test_json_echo(self):
        c = cfg(replications=3)
        doc = json.loads(summaries_to_json(run_experiment(c), c))
        assert doc["config"]["seed"] == 7 and doc["config"]["estimator"] == "n-hat"
        assert len(doc["results"]) == 16
        assert set(CSV_COLUMNS) <= set(doc["results"][0])

    def test_std_err_scaling(self):
        text = "grid.d = 400\ngrid.s = 3\ngrid.norm2 = 30\nseed = 3\n"
        (small,) = run_experiment(cfg(text, replications=400))
        (large,) = run_experiment(cfg(text, replications=1600))
        assert small.std_err / large.std_err == pytest.approx(2.0, rel=0.2)

    def test_s_exceeds_d(self):
        with pytest.raises(ValueError):
            run_experiment(cfg("grid.d = 5\ngrid.s = 6"))


class TestRateCurve:
    TEXT = "grid.d = 400\ngrid.s = 1, 4, 20, 100, 400\ngrid.family = {}\nreplications = 30\n" \
           "grid.norm2_scale = 0, 1\n"

    def test_identity_elbow(self):
        rows, _ = rate_curve(cfg(self.TEXT.format("identity")))
        rates = {r.s: r.rate_value for r in rows}
        # flat at sqrt(d) = 20 past the elbow at s = sqrt(d)
        assert rates[100] == rates[400] == 20.0
        assert rates[20] == 20 * math.log(2)
        assert rates[1] < rates[4] < rates[20]

    def test_equicorrelation_no_elbow(self):
        rows, _ = rate_curve(cfg(self.TEXT.format("equicorrelation(1)")))
        # ||Sigma||_F = d, so every s <= d stays on the s log(1 + t/s^2) branch
        for r in rows:
            assert r.rate_value == r.s * math.log1p(400.0 ** 2 / r.s ** 2)

    def test_ratio_band(self):
        rows, _ = rate_curve(cfg(self.TEXT.format("identity")))
        ratios = [r.worst_scaled_risk for r in rows]
        assert max(ratios) / min(ratios) <= 10.0

    def test_svg_deterministic(self):
        c = cfg(self.TEXT.format("identity"))
        a = rate_curve_svg(rate_curve(c, threads=1)[0])
        b = rate_curve_svg(rate_curve(c, threads=3)[0])
        assert a == b
        assert a.startswith("<svg") or a.startswith("<?xml")
        assert "identity d=400" in a


class TestIdentities:
    N = 40_000

    def test_square_rows(self):
        row = lemma_square(1, self.N)
        assert row.passed
        assert {c.setting for c in row.checks} >= {"nu=0", "nu=1"} or len(row.checks) == 4

    @pytest.mark.parametrize("fn", [lemma_truncated, lemma_cdf, lemma_cosine])
    def test_bound_rows(self, fn):
        assert fn(2, self.N).passed

    def test_cosine_closed_form_independent(self):
        assert cosine_covariance_exact(1.0, 0.7, 0.4, 1.0, 0.8, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_prop_square(self):
        assert prop_square(3, 20_000).passed

    def test_requires_many_replications(self):
        with pytest.raises(ValueError):
            verify_identities(1, 1000)
