"""Acceptance suite.

Each test covers one numbered acceptance criterion at its stated tolerance
and prints a PASS line when it completes.  Run with::

    pytest tests/test_acceptance.py -v -s
"""

import importlib
import time

import numpy as np
import pandas as pd
import pytest

from carbonrisk.enhanced_index import Benchmark, te_linearity_report, te_optimize
from carbonrisk.factors import SortedBuckets, bmg_return, sort_universe
from carbonrisk.garch import conditional_variance, fit_garch11, standardize_factor
from carbonrisk.kalman import (
    StateSpaceConfig,
    forecast_error_compare,
    kalman_filter,
    mle_fit,
    ols_implied_config,
)
from carbonrisk.linalg import smw_rank2_inverse
from carbonrisk.minvar import (
    gmv_capm,
    gmv_two_factor,
    mv_capm_long_only,
    mv_carbon_constrained,
    mv_two_factor_long_only,
)
from carbonrisk.qp import QpProblem, solve_qp
from carbonrisk.regression import ols_fit
from carbonrisk.synth import SynthSpec, generate_panel

from conftest import random_model


def announce(criterion, detail=""):
    print(f"\nACCEPTANCE {criterion}: PASS {detail}")


def pct(w):
    return 100 * np.asarray(w)


class TestC1TableExactOracles:
    """Criterion 1: worked 5-asset examples, all four solvers plus the
    constrained and benchmark-tracking variants, in under one second."""

    def test_c1_table_exact(self, model_set1, model_set2, model_set3):
        t0 = time.perf_counter()

        res = gmv_capm(model_set1)
        np.testing.assert_allclose(
            pct(res.weights), [147.33, 24.67, -49.19, 74.20, -97.01], atol=0.01
        )
        assert abs(res.beta_star - 1.0972) <= 1e-4

        res = mv_capm_long_only(model_set1)
        np.testing.assert_allclose(
            pct(res.weights), [0.0, 9.45, 0.0, 90.55, 0.0], atol=0.01
        )
        assert abs(res.beta_star - 0.8307) <= 1e-4

        res = gmv_two_factor(model_set1)
        np.testing.assert_allclose(
            pct(res.weights), [166.55, 21.37, -58.80, 65.06, -94.18], atol=0.01
        )
        assert abs(res.beta_star - 1.0906) <= 1e-4
        assert abs(res.gamma_star - 19.7724) <= 1e-4

        res = mv_two_factor_long_only(model_set1)
        np.testing.assert_allclose(
            pct(res.weights), [33.54, 1.46, 0.0, 64.99, 0.0], atol=0.01
        )
        assert abs(res.beta_star - 0.8667) <= 1e-4
        assert abs(res.gamma_star - 9.7394) <= 1e-4

        res2 = gmv_two_factor(model_set2)
        np.testing.assert_allclose(
            pct(res2.weights), [105.46, 27.88, 40.19, 76.77, -150.30], atol=0.01
        )
        mv2 = mv_two_factor_long_only(model_set2)
        np.testing.assert_allclose(
            pct(mv2.weights), [0.0, 19.48, 13.61, 66.91, 0.0], atol=0.01
        )
        mv3 = mv_two_factor_long_only(model_set3)
        np.testing.assert_allclose(pct(mv3.weights), pct(mv2.weights), atol=0.01)
        assert abs(mv2.gamma_star - (-9.0718)) <= 1e-4
        assert abs(mv3.gamma_star - 9.0718) <= 1e-4

        c1 = mv_carbon_constrained(model_set1, beta_plus=0.0)
        np.testing.assert_allclose(
            pct(c1.weights), [64.29, 0.0, 0.0, 35.71, 0.0], atol=0.01
        )
        c2 = mv_carbon_constrained(model_set2, beta_plus=0.0)
        np.testing.assert_allclose(pct(c2.weights), pct(mv2.weights), atol=0.01)
        assert c2.lambda_bmg == 0.0
        c3 = mv_carbon_constrained(model_set3, beta_plus=0.0)
        np.testing.assert_allclose(
            pct(c3.weights), [0.0, 16.11, 25.89, 58.00, 0.0], atol=0.01
        )
        # multipliers positive; with decimal variance units they land on the
        # printed basis-point values, checked up to rounding of those prints
        assert c1.lambda_bmg > 0 and c3.lambda_bmg > 0
        assert 1e4 * c1.lambda_bmg == pytest.approx(65.0, abs=0.5)
        assert 1e4 * c3.lambda_bmg == pytest.approx(56.0, abs=0.5)

        te = te_optimize(
            model_set1, Benchmark.equal_weight(5), constraint="relative", cap=0.0
        )
        np.testing.assert_allclose(
            pct(te.weights), [36.77, 17.12, 11.61, 12.03, 22.48], atol=0.01
        )
        np.testing.assert_allclose(
            te.diagnostics.scaled_betas,
            [-56.38, 12.22, 29.46, 34.10, -14.33],
            atol=0.01,
        )

        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"table oracles took {elapsed:.2f}s"
        announce("C1", f"(table-exact oracles, {elapsed * 1000:.0f} ms)")


class TestC2ClosedFormVsQp:
    """Criterion 2: closed-form and QP weights agree to 1e-6 on 100 seeded
    random two-factor universes, within 30 seconds."""

    def test_c2_equivalence(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        count = 0
        for n in (5, 10, 25, 50):
            for _ in range(25):
                model = random_model(rng, n)
                sigma = model.matrix()
                gmv = gmv_two_factor(model)
                sol = solve_qp(
                    QpProblem(
                        Q=sigma, c=np.zeros(n), A=np.ones((1, n)), b=np.array([1.0])
                    )
                )
                assert np.max(np.abs(gmv.weights - sol.x)) < 1e-6

                mv = mv_two_factor_long_only(model)
                sol_lo = solve_qp(
                    QpProblem(
                        Q=sigma, c=np.zeros(n), A=np.ones((1, n)),
                        b=np.array([1.0]), lb=np.zeros(n),
                    )
                )
                # reconstruct weights from the endogenous thresholds on the
                # reported support, then compare against the optimizer
                recon = np.zeros(n)
                sup = list(mv.support)
                gamma_term = (
                    0.0
                    if np.isinf(mv.gamma_star)
                    else model.beta_bmg[sup] / mv.gamma_star
                )
                recon[sup] = mv.variance / model.idio_var[sup] * (
                    1 - model.beta_mkt[sup] / mv.beta_star - gamma_term
                )
                assert np.max(np.abs(recon - sol_lo.x)) < 1e-6
                count += 1
        elapsed = time.perf_counter() - t0
        assert count == 100
        assert elapsed < 30.0, f"equivalence suite took {elapsed:.1f}s"
        announce("C2", f"(100 universes, {elapsed:.1f} s)")


class TestC3SmwCorrectness:
    """Criterion 3: rank-2 diagonal SMW inverse vs dense inversion, 1000
    random instances, 1e-10 relative Frobenius."""

    def test_c3_smw(self):
        rng = np.random.default_rng(33)
        for _ in range(1000):
            n = int(rng.integers(2, 51))
            a = rng.uniform(0.01, 2.0, n)
            u1 = rng.normal(0, 1, n)
            u2 = rng.normal(0, 1, n)
            dense = np.linalg.inv(np.diag(a) + np.outer(u1, u1) + np.outer(u2, u2))
            ours = smw_rank2_inverse(a, u1, u2)
            rel = np.linalg.norm(ours - dense) / np.linalg.norm(dense)
            assert rel < 1e-10
        announce("C3", "(1000 SMW instances)")


class TestC4KalmanProperties:
    """Criterion 4: filter equals Bayesian regression when the state is
    static; the likelihood decomposes over innovations; the time-varying
    model out-forecasts static OLS on random-walk-beta data."""

    def test_c4a_static_state_matches_bayesian_posterior(self):
        rng = np.random.default_rng(44)
        for _ in range(10):
            t_len = 90
            x = np.column_stack([np.ones(t_len), rng.normal(0, 0.05, (t_len, 2))])
            beta_true = rng.normal(0, 1, 3)
            sigma2 = 4e-4
            y = x @ beta_true + rng.normal(0, np.sqrt(sigma2), t_len)
            beta0 = rng.normal(0, 1, 3)
            a = rng.normal(size=(3, 3))
            p0 = a @ a.T + 0.05 * np.eye(3)
            cfg = StateSpaceConfig(
                sigma_eps2=sigma2, state_variances=np.zeros(3), beta0=beta0, P0=p0
            )
            fit = kalman_filter(y, x, cfg)
            posterior = np.linalg.solve(
                np.linalg.inv(p0) + x.T @ x / sigma2,
                np.linalg.solve(p0, beta0) + x.T @ y / sigma2,
            )
            assert np.max(np.abs(fit.terminal_state - posterior)) < 1e-6
        announce("C4a", "(static-state posterior identity)")

    def test_c4b_loglik_equals_innovation_density_sum(self):
        from scipy.stats import norm

        rng = np.random.default_rng(45)
        for _ in range(10):
            res = generate_panel(
                SynthSpec(n_assets=1, n_months=100, seed=int(rng.integers(1e6)),
                          beta_mkt_step_std=0.05)
            )
            y = res.returns.iloc[:, 0].to_numpy()
            x = np.column_stack(
                [np.ones(len(y)), res.factors[["MKT", "BMG"]].to_numpy()]
            )
            cfg = ols_implied_config(y, x, state_variances=np.full(3, 1e-4))
            fit = kalman_filter(y, x, cfg)
            recomputed = float(
                np.sum(
                    norm.logpdf(
                        fit.innovations, scale=np.sqrt(fit.innovation_variances)
                    )
                )
            )
            assert abs(fit.loglik - recomputed) <= 1e-10 * abs(recomputed)
        announce("C4b", "(log-likelihood decomposition)")

    def test_c4c_ssm_beats_static_ols(self):
        # on data with genuinely drifting betas the filter must out-forecast
        # the static fit in the vast majority of runs
        t0 = time.perf_counter()
        wins = 0
        n_runs = 100
        for seed in range(n_runs):
            res = generate_panel(
                SynthSpec(
                    n_assets=1, n_months=120, seed=seed,
                    sigma_mkt=0.05, sigma_bmg=0.04,
                    idio_vol_low=0.01, idio_vol_high=0.02,
                    beta_mkt_step_std=0.10, beta_bmg_step_std=0.10,
                )
            )
            y = res.returns.iloc[:, 0].to_numpy()
            x = np.column_stack(
                [np.ones(len(y)), res.factors[["MKT", "BMG"]].to_numpy()]
            )
            mle = mle_fit(y, x)
            kf = kalman_filter(y, x, mle.config)
            ols = ols_fit(
                y, pd.DataFrame(x[:, 1:], columns=["MKT", "BMG"]), ("MKT", "BMG")
            )
            cmp_ = forecast_error_compare(y, x, ols, kf)
            wins += cmp_.rmse_ssm < cmp_.rmse_ols
        elapsed = time.perf_counter() - t0
        assert wins / n_runs >= 0.80, f"SSM won only {wins}/100"
        assert elapsed < 120.0, f"forecast comparison took {elapsed:.0f}s"
        announce("C4c", f"(SSM beat OLS {wins}/100, {elapsed:.0f} s)")


class TestC5TrackingErrorLinearity:
    """Criterion 5: tracking error is linear in the carbon-beta reduction on
    a 100-asset universe, and the constraint multiplier never decreases."""

    def test_c5_linearity(self):
        rng = np.random.default_rng(55)
        model = random_model(rng, 100)
        bench = Benchmark.equal_weight(100)
        base = float(model.beta_bmg @ bench.weights)
        max_delta = base - float(np.min(model.beta_bmg))
        deltas = np.linspace(0.05, 0.6, 12) * max_delta  # interior of feasibility
        report = te_linearity_report(model, bench, deltas)
        feasible = [r for r in report.rows if r["feasible"]]
        assert len(feasible) == len(deltas)
        assert report.r_squared >= 0.98
        lambdas = [r["lambda_bmg"] for r in feasible]
        assert np.all(np.diff(lambdas) >= -1e-10)
        announce(
            "C5",
            f"(R^2 = {report.r_squared:.4f}, lambda monotone over {len(deltas)} targets)",
        )


class TestC6SignFlipAndNesting:
    """Criterion 6: carbon-beta sign flips leave portfolios unchanged, and
    zero carbon betas reduce the two-factor solvers to the CAPM ones."""

    def test_c6_invariants(self):
        rng = np.random.default_rng(66)
        for _ in range(100):
            n = int(rng.integers(5, 30))
            model = random_model(rng, n)
            flipped = model.with_bmg(-model.beta_bmg)
            g, gf = gmv_two_factor(model), gmv_two_factor(flipped)
            assert np.max(np.abs(g.weights - gf.weights)) < 1e-8
            m, mf = mv_two_factor_long_only(model), mv_two_factor_long_only(flipped)
            assert np.max(np.abs(m.weights - mf.weights)) < 1e-8

            zero = model.with_bmg(np.zeros(n))
            g0 = gmv_two_factor(zero)
            g_capm = gmv_capm(model)
            assert np.max(np.abs(g0.weights - g_capm.weights)) < 1e-10
            m0 = mv_two_factor_long_only(zero)
            m_capm = mv_capm_long_only(model)
            assert np.max(np.abs(m0.weights - m_capm.weights)) < 1e-10
        announce("C6", "(100 sign-flip and nesting instances)")


class TestC7FactorInvariants:
    """Criterion 7: long-short neutrality, sort rank-invariance, and the
    unit conditional scale of the standardized factor."""

    def test_c7a_translation_and_rank_invariance(self):
        rng = np.random.default_rng(77)
        for _ in range(500):
            n = 16
            assets = [f"A{i:02d}" for i in range(n)]
            labels = pd.Series(
                [["SB", "BB", "SG", "BG"][i % 4] for i in range(n)], index=assets
            )
            buckets = SortedBuckets(assignments=labels)
            rets = pd.Series(rng.normal(0, 0.05, n), index=assets)
            caps = pd.Series(rng.uniform(1, 100, n), index=assets)
            shift = float(rng.normal(0, 0.1))
            weighting = "CW" if rng.random() < 0.5 else "EW"
            base = bmg_return(buckets, rets, caps, weighting)
            shifted = bmg_return(buckets, rets + shift, caps, weighting)
            assert abs(base - shifted) < 1e-12

        for _ in range(500):
            n = int(rng.integers(6, 40))
            assets = [f"A{i:02d}" for i in range(n)]
            scores = pd.Series(rng.uniform(0, 1, n), index=assets)
            caps = pd.Series(rng.uniform(1, 100, n), index=assets)
            base = sort_universe(scores, caps).assignments
            power = float(rng.uniform(1.5, 4.0))
            warped = sort_universe(scores**power, np.log1p(caps)).assignments
            assert (base == warped).all()
        announce("C7a", "(1000 randomized invariance cases)")

    def test_c7b_garch_unit_conditional_scale(self):
        rng = np.random.default_rng(78)
        # simulate a volatility-clustered factor series
        omega, alpha, beta = 1e-5, 0.08, 0.88
        n = 4000
        r = np.empty(n)
        s = omega / (1 - alpha - beta)
        for t in range(n):
            r[t] = np.sqrt(s) * rng.standard_normal()
            s = omega + alpha * r[t] ** 2 + beta * s
        params = fit_garch11(r)
        standardized = standardize_factor(r, params)
        # rescaled by its 1% target the series must have unit variance
        z = standardized * 100
        assert np.std(z) == pytest.approx(1.0, abs=0.05)
        # and the conditional-volatility path must reproduce the input
        sigma = np.sqrt(conditional_variance(r, params))
        np.testing.assert_allclose(standardized * 100 * sigma, r, atol=1e-15)
        announce("C7b", "(unit conditional scale after standardization)")


class TestC8EmpiricalNonReproducibility:
    """Criterion 8: results tied to proprietary vendor data (index
    membership, ESG scores, emission intensities) ship no fixtures here;
    the estimators are validated instead by the null/power Monte Carlo
    suites and the property tests, whose presence this test pins."""

    def test_c8_substitute_suites_present(self):
        kalman_tests = importlib.import_module("test_kalman")
        regression_tests = importlib.import_module("test_regression")
        # null and power Monte Carlo substitutes
        assert hasattr(
            kalman_tests.TestMleFit, "test_null_state_variances_mostly_insignificant"
        )
        assert hasattr(
            kalman_tests.TestMleFit, "test_power_detects_random_walk_market_beta"
        )
        assert hasattr(regression_tests.TestBatchCompare, "test_null_size_close_to_level")
        assert hasattr(regression_tests.TestBatchCompare, "test_power_when_bmg_loads")
        announce("C8", "(documented substitution by property suites)")
