import json

import numpy as np
import pytest

from releff.inference import FitSpec
from releff.sim import (
    SHAPES,
    censoring_rate,
    gen_censoring,
    gen_covariates,
    gen_event_times,
    make_scenario,
    run_scenario,
    scenario_from_json,
    simulate_dataset,
    true_theta_weibull_equal_shapes,
    true_theta_weibull_numeric,
    warp_speed_harness,
)


class TestScenarioDefinitions:
    def test_named_parameter_vectors(self):
        sc = make_scenario("ii", "II", 50, 50, censored=False)
        np.testing.assert_array_equal(sc.gamma1, [0.2, 0.0])
        np.testing.assert_array_equal(sc.gamma2, [0.0, 0.5])
        assert sc.gamma10 == sc.gamma20 == 0.0
        assert (sc.k1, sc.k2) == (3.0, 3.0)

        sc4 = make_scenario("iv", "I", 40, 60, censored=True)
        np.testing.assert_array_equal(sc4.gamma1, [0.0, 0.2, 0.4, 0.6])
        np.testing.assert_array_equal(sc4.gamma2, [-0.2, 0.4, -0.6, 0.0])
        assert (sc4.k1, sc4.k2) == (2.0, 3.0)
        assert sc4.p == 4

    def test_null_scenarios_have_zero_gammas(self):
        for sid, p in (("i", 2), ("iii", 4)):
            sc = make_scenario(sid, "I", 50, 50, censored=False)
            assert sc.p == p
            assert not sc.gamma1.any() and not sc.gamma2.any()

    def test_settings(self):
        assert SHAPES["I"] == (2.0, 3.0)
        assert SHAPES["II"] == (3.0, 3.0)

    def test_unknown_ids_rejected(self):
        with pytest.raises(ValueError):
            make_scenario("v", "I", 10, 10, False)
        with pytest.raises(ValueError):
            make_scenario("i", "III", 10, 10, False)

    def test_scenario_from_json(self, tmp_path):
        cfg = tmp_path / "scenario.json"
        cfg.write_text(json.dumps(
            {"scenario": "ii", "setting": "I", "n1": 40, "n2": 60, "censored": True}
        ))
        sc = scenario_from_json(cfg)
        assert sc.scenario_id == "ii" and sc.setting == "I"
        assert (sc.n1, sc.n2, sc.censored) == (40, 60, True)


class TestCovariateDesigns:
    def test_group1_p2_bernoulli_is_sign_balanced(self):
        rng = np.random.default_rng(0)
        Z = gen_covariates(1, 2, 100_000, rng)
        assert Z[:, 1].mean() == pytest.approx(0.5, abs=0.01)
        # conditional on the normal's sign the rate moves by +-0.1
        pos = Z[Z[:, 0] > 0, 1].mean()
        assert pos == pytest.approx(0.6, abs=0.01)

    def test_group2_p2_normal_variance(self):
        rng = np.random.default_rng(1)
        Z = gen_covariates(2, 2, 100_000, rng)
        assert Z[:, 0].var() == pytest.approx(1.2, abs=0.03)

    def test_group1_p4_correlation(self):
        rng = np.random.default_rng(2)
        Z = gen_covariates(1, 4, 100_000, rng)
        assert np.corrcoef(Z[:, 0], Z[:, 1])[0, 1] == pytest.approx(0.2, abs=0.01)
        assert Z[:, 2].mean() == pytest.approx(0.4, abs=0.01)
        assert Z[:, 3].mean() == pytest.approx(0.6, abs=0.01)

    def test_group2_p4_covariance(self):
        rng = np.random.default_rng(3)
        Z = gen_covariates(2, 4, 100_000, rng)
        assert Z[:, 0].var() == pytest.approx(1.1, abs=0.03)
        assert np.cov(Z[:, 0], Z[:, 1])[0, 1] == pytest.approx(0.3, abs=0.02)

    def test_unsupported_design(self):
        with pytest.raises(ValueError):
            gen_covariates(1, 3, 10, np.random.default_rng(0))


class TestEventAndCensoringDraws:
    def test_unit_scale_weibull_survival(self):
        rng = np.random.default_rng(4)
        Z = np.zeros((1_000_000, 1))
        T = gen_event_times(0.0, [0.0], 3.0, Z, rng)
        assert np.mean(T > 1.0) == pytest.approx(np.exp(-1), abs=0.002)

    def test_weibull_survival_at_hazard_crossing(self):
        # shapes 2 and 3 at unit scale cross at t = 2/3 (displayed as 0.667)
        t = 2.0 / 3.0
        assert round(float(np.exp(-(t**2))), 3) == 0.641
        assert round(float(np.exp(-(t**3))), 3) == 0.744

    def test_huge_bound_means_no_censoring(self):
        sc = make_scenario("i", "II", 200, 200, censored=True)
        rng = np.random.default_rng(5)
        T = gen_event_times(0.0, np.zeros(2), 3.0, np.zeros((200, 2)), rng)
        C = gen_censoring(1e9, 200, rng)
        assert np.all(T <= C)

    def test_invalid_bound(self):
        with pytest.raises(ValueError):
            gen_censoring(0.0, 5, np.random.default_rng(0))

    def test_censoring_rate_reasonable(self):
        sc = make_scenario("i", "II", 50, 50, censored=True)
        rate = censoring_rate(sc, 2, 200_000, seed=0)
        assert 0.050 <= rate <= 0.087


class TestTrueTheta:
    def test_symmetric_null(self):
        assert true_theta_weibull_equal_shapes(0, [], [], 0, [], [], 3.0) == pytest.approx(0.5)

    def test_logistic_at_log3(self):
        # k * (eta1 - eta2) = log 3 puts the infinite-horizon value at 3/4
        assert true_theta_weibull_equal_shapes(
            np.log(3) / 2, [], [], 0, [], [], 2.0
        ) == pytest.approx(0.75)

    def test_unit_scale_closed_form(self):
        for tau in (0.3, 1.0, 2.5):
            expected = (1 - np.exp(-2 * tau**3)) / 2
            got = true_theta_weibull_equal_shapes(0, [], [], 0, [], [], 3.0, tau)
            assert got == pytest.approx(expected, abs=1e-12)

    def test_against_quadrature(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            e1, e2 = rng.uniform(-0.6, 0.6, 2)
            k = rng.uniform(1.0, 4.0)
            tau = rng.uniform(0.5, 6.0)
            cf = true_theta_weibull_equal_shapes(e1, [], [], e2, [], [], k, tau)
            nm = true_theta_weibull_numeric(np.exp(e1), k, np.exp(e2), k, tau)
            assert cf == pytest.approx(nm, abs=1e-6)

    def test_invalid_shape(self):
        with pytest.raises(ValueError):
            true_theta_weibull_equal_shapes(0, [], [], 0, [], [], -1.0)


class TestScenarioRunner:
    def test_simulated_dataset_shapes(self):
        sc = make_scenario("iv", "I", 13, 17, censored=True)
        data = simulate_dataset(sc, np.random.default_rng(0))
        assert (data.n1, data.n2) == (13, 17)
        assert (data.p1, data.p2) == (4, 4)
        assert not data.uncensored  # overwhelmingly likely at these rates

    def test_run_scenario_deterministic(self):
        sc = make_scenario("i", "II", 15, 15, censored=False)
        rows_a, res_a = run_scenario(sc, M=120, seed=8)
        rows_b, res_b = run_scenario(sc, M=120, seed=8)
        assert rows_a == rows_b
        np.testing.assert_array_equal(res_a.estimates, res_b.estimates)

    def test_hypothesis_labels(self):
        sc = make_scenario("ii", "II", 15, 15, censored=False)
        rows, _ = run_scenario(sc, M=100, seed=0)
        assert [r["hypothesis"] for r in rows] == ["H1(1)", "H0(2)"]

    def test_minimum_monte_carlo_size(self):
        sc = make_scenario("i", "II", 15, 15, censored=False)
        with pytest.raises(ValueError):
            warp_speed_harness(sc, M=10)

    def test_null_intercept_concentrates_at_half(self):
        sc = make_scenario("i", "II", 50, 50, censored=False)
        spec = FitSpec()
        intercepts = []
        for m in range(200):
            r = np.random.default_rng(np.random.SeedSequence(17, spawn_key=(m,)))
            intercepts.append(spec.fit(simulate_dataset(sc, r)).beta[0])
        assert np.mean(intercepts) == pytest.approx(0.5, abs=0.02)

    def test_null_slopes_center_at_zero(self):
        sc = make_scenario("i", "II", 40, 40, censored=True)
        spec = FitSpec()
        slopes = []
        for m in range(120):
            r = np.random.default_rng(np.random.SeedSequence(19, spawn_key=(m,)))
            fit = spec.fit(simulate_dataset(sc, r))
            slopes.append([fit.beta[1], fit.beta[3]])
        med = np.median(slopes, axis=0)
        np.testing.assert_allclose(med, 0.0, atol=0.03)
