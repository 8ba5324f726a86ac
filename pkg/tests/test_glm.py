"""Fitters and tests against independent oracles.

The linear fit is checked against a hand-rolled Gaussian elimination of the
normal equations; the saturated logistic fit against per-cell sample
proportions; test statistics against their textbook identities and a small
Monte Carlo level study.
"""

import numpy as np
import pytest
from scipy import stats

from gmethods.data import Dataset, Schema, binary
from gmethods.errors import EstimationError, SeparationError
from gmethods.glm import (
    expit,
    fit_linear,
    fit_logistic,
    logit,
    pooled_rows,
    robust_score_test,
    score_test_added,
    wald_test,
)
from gmethods.streams import substream


def solve_by_elimination(M, b):
    """Textbook Gaussian elimination with partial pivoting (test oracle)."""
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    p = len(b)
    for col in range(p):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        M[[col, piv]] = M[[piv, col]]
        b[[col, piv]] = b[[piv, col]]
        for r in range(col + 1, p):
            f = M[r, col] / M[col, col]
            M[r, col:] -= f * M[col, col:]
            b[r] -= f * b[col]
    x = np.zeros(p)
    for r in range(p - 1, -1, -1):
        x[r] = (b[r] - M[r, r + 1 :] @ x[r + 1 :]) / M[r, r]
    return x


class TestExpit:
    def test_center(self):
        assert expit(0.0) == 0.5

    def test_saturation(self):
        assert abs(expit(40.0) - 1.0) < 1e-12
        assert expit(-40.0) < 1e-12

    def test_symmetry_identity(self):
        for b in (-3.0, 0.2, 7.0):
            assert abs(expit(b) + expit(-b) - 1.0) < 1e-15

    def test_no_overflow_far_out(self):
        assert expit(-800.0) == 0.0
        assert expit(800.0) == 1.0

    def test_logit_inverts(self):
        for p in (0.01, 0.25, 0.5, 0.93):
            assert abs(expit(logit(p)) - p) < 1e-12


class TestFitLinear:
    def test_intercept_only_is_mean_and_mle_variance(self):
        fit = fit_linear(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]))
        assert abs(fit.coef[0] - 2.0) < 1e-12
        assert abs(fit.dispersion - 2.0 / 3.0) < 1e-12

    def test_exact_fit_zero_dispersion(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        y = 1.0 + 2.0 * np.arange(5.0)
        fit = fit_linear(X, y)
        np.testing.assert_allclose(fit.coef, [1.0, 2.0], atol=1e-10)
        assert fit.dispersion < 1e-20

    def test_matches_elimination_oracle(self):
        rng = substream(314, "glm", "linear")
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
        y = rng.normal(size=50)
        fit = fit_linear(X, y)
        oracle = solve_by_elimination(X.T @ X, X.T @ y)
        np.testing.assert_allclose(fit.coef, oracle, atol=1e-8)

    def test_score_equation_solved(self):
        rng = substream(314, "glm", "linear-score")
        X = np.column_stack([np.ones(80), rng.normal(size=(80, 3))])
        y = rng.normal(size=80)
        fit = fit_linear(X, y)
        assert np.max(np.abs(X.T @ (y - X @ fit.coef))) < 1e-8 * 80

    def test_vcov_symmetric(self):
        rng = substream(314, "glm", "linear-vcov")
        X = np.column_stack([np.ones(40), rng.normal(size=(40, 2))])
        fit = fit_linear(X, rng.normal(size=40))
        assert np.max(np.abs(fit.vcov - fit.vcov.T)) < 1e-12

    def test_rank_deficiency_rejected(self):
        X = np.column_stack([np.ones(10), np.ones(10)])
        with pytest.raises(EstimationError, match="condition"):
            fit_linear(X, np.arange(10.0))

    def test_recentring_changes_intercept_only(self):
        rng = substream(314, "glm", "recenter")
        x = rng.normal(size=60)
        X1 = np.column_stack([np.ones(60), x])
        X2 = np.column_stack([np.ones(60), x - 5.0])
        y = rng.normal(size=60)
        f1, f2 = fit_linear(X1, y), fit_linear(X2, y)
        assert abs(f1.coef[1] - f2.coef[1]) < 1e-8
        assert abs(f2.coef[0] - (f1.coef[0] + 5.0 * f1.coef[1])) < 1e-8


class TestFitLogistic:
    def test_intercept_only_closed_form(self):
        y = np.array([1.0] + [0.0] * 3)
        fit = fit_logistic(np.ones((4, 1)), y)
        assert abs(fit.coef[0] - logit(0.25)) < 1e-8

    def test_saturated_model_matches_cell_means(self):
        # Binary x, saturated (1, x): fitted probs must equal cell proportions.
        rng = substream(314, "glm", "saturated")
        x = (rng.random(400) < 0.4).astype(float)
        y = (rng.random(400) < np.where(x > 0, 0.7, 0.2)).astype(float)
        fit = fit_logistic(np.column_stack([np.ones(400), x]), y)
        p_hat = expit(fit.coef[0] + fit.coef[1] * np.array([0.0, 1.0]))
        cells = np.array([y[x == 0].mean(), y[x == 1].mean()])
        np.testing.assert_allclose(p_hat, cells, atol=1e-8)

    def test_score_zero_at_mle(self):
        rng = substream(314, "glm", "logit-score")
        X = np.column_stack([np.ones(300), rng.normal(size=300)])
        y = (rng.random(300) < expit(0.3 - 0.8 * X[:, 1])).astype(float)
        fit = fit_logistic(X, y)
        assert np.max(np.abs(X.T @ (y - expit(X @ fit.coef)))) < 1e-6

    def test_irrelevant_column_small(self):
        rng = substream(314, "glm", "logit-null")
        X = np.column_stack([np.ones(10_000), rng.normal(size=10_000)])
        y = (rng.random(10_000) < 0.35).astype(float)
        fit = fit_logistic(X, y)
        se = np.sqrt(fit.vcov[1, 1])
        assert abs(fit.coef[1]) < 4.0 * se

    def test_separation_detected(self):
        # Unit-scale regressor so saturation needs a diverging coefficient.
        x = np.concatenate([np.full(20, -0.5), np.full(20, 0.5)])
        y = (x > 0).astype(float)
        with pytest.raises(SeparationError):
            fit_logistic(np.column_stack([np.ones(40), x]), y)

    def test_non_binary_response_rejected(self):
        with pytest.raises(EstimationError, match="0/1"):
            fit_logistic(np.ones((5, 1)), np.array([0.0, 1.0, 2.0, 0.0, 1.0]))


class TestWald:
    def test_zero_restriction_gives_p_one(self):
        # Symmetric responses: the intercept estimate is exactly 0.
        fit = fit_linear(np.ones((2, 1)), np.array([-1.0, 1.0]))
        rep = wald_test(fit, [0])
        assert rep.statistic < 1e-12 and rep.p_value > 1.0 - 1e-9

    def test_single_coefficient_identity(self):
        rng = substream(314, "glm", "wald")
        X = np.column_stack([np.ones(60), rng.normal(size=60)])
        fit = fit_linear(X, rng.normal(size=60))
        rep = wald_test(fit, [1])
        z2 = (fit.coef[1] / np.sqrt(fit.vcov[1, 1])) ** 2
        assert abs(rep.statistic - z2) < 1e-12
        assert rep.df == 1 and rep.reference == "chi2"

    def test_level_on_simulated_null(self):
        # 2-df joint Wald under a true null: rejection rate 0.05 +/- 0.02.
        rng = substream(314, "glm", "wald-level")
        hits = 0
        for _ in range(500):
            X = np.column_stack([np.ones(100), rng.normal(size=(100, 2))])
            fit = fit_linear(X, rng.normal(size=100))
            hits += int(wald_test(fit, [1, 2]).reject)
        assert 0.03 <= hits / 500 <= 0.07

    def test_p_value_consistent_with_reference(self):
        rng = substream(314, "glm", "wald-p")
        X = np.column_stack([np.ones(50), rng.normal(size=50)])
        fit = fit_linear(X, rng.normal(size=50))
        rep = wald_test(fit, [0, 1])
        assert abs(rep.p_value - rep.recomputed_p()) < 1e-10


class TestScoreTestAdded:
    def test_zero_column_gives_zero(self):
        rng = substream(314, "glm", "score-zero")
        X = np.ones((50, 1))
        y = (rng.random(50) < 0.5).astype(float)
        rep = score_test_added(X, y, np.zeros((50, 1)), "binomial")
        assert rep.statistic == 0.0

    def test_duplicated_regressor_gives_zero(self):
        rng = substream(314, "glm", "score-dup")
        x = rng.normal(size=200)
        X = np.column_stack([np.ones(200), x])
        y = (rng.random(200) < expit(0.2 + 0.5 * x)).astype(float)
        rep = score_test_added(X, y, x.copy(), "binomial")
        assert rep.statistic < 1e-8

    def test_matches_likelihood_ratio_on_local_alternative(self):
        # Rao score and LR are asymptotically equivalent; on a local
        # alternative at n=4000 they agree to a few percent.
        rng = substream(314, "glm", "score-lr")
        n = 4000
        x = rng.normal(size=n)
        z = rng.normal(size=n)
        y = (rng.random(n) < expit(0.3 * x + 1.5 / np.sqrt(n) * z)).astype(float)
        X = np.column_stack([np.ones(n), x])
        score = score_test_added(X, y, z, "binomial").statistic
        null = fit_logistic(X, y)
        full = fit_logistic(np.column_stack([X, z]), y)
        lr = 2.0 * (full.loglik - null.loglik)
        assert abs(score - lr) < 0.05 * max(1.0, lr)

    def test_known_null_skips_nuisance_projection(self):
        # With the design probabilities known, the variance is the raw
        # information of Z, which can only be larger than the projected one.
        rng = substream(314, "glm", "score-known")
        n = 500
        x = rng.normal(size=n)
        X = np.column_stack([np.ones(n), x])
        y = (rng.random(n) < expit(0.4 * x)).astype(float)
        z = rng.normal(size=n) + x
        est = score_test_added(X, y, z, "binomial", fit=fit_logistic(X, y))
        known = score_test_added(X, y, z, "binomial", known_coef=np.array([0.0, 0.4]))
        assert est.df == known.df == 1
        assert known.statistic <= est.statistic * 1.5 + 1.0  # same scale, no blowup

    def test_normal_family_score(self):
        rng = substream(314, "glm", "score-normal")
        n = 300
        x = rng.normal(size=n)
        z = rng.normal(size=n)
        y = 1.0 + 0.5 * x + rng.normal(size=n)
        X = np.column_stack([np.ones(n), x])
        rep = score_test_added(X, y, z, "normal")
        assert rep.reference == "chi2" and rep.df == 1
        assert rep.statistic < stats.chi2.ppf(0.9999, 1)

    def test_zero_residual_variance_rejected(self):
        X = np.column_stack([np.ones(10), np.arange(10.0)])
        y = 2.0 + 3.0 * np.arange(10.0)  # exact fit
        with pytest.raises(EstimationError, match="residual variance"):
            score_test_added(X, y, np.random.default_rng(0).normal(size=10), "normal")


class TestRobustScore:
    def test_reduces_to_sane_level_on_iid_rows(self):
        rng = substream(314, "glm", "robust")
        hits = 0
        for _ in range(200):
            n = 300
            x = rng.normal(size=n)
            X = np.column_stack([np.ones(n), x])
            y = (rng.random(n) < expit(0.2 * x)).astype(float)
            z = rng.normal(size=n)
            rep = robust_score_test(X, y, z, np.arange(n))
            hits += int(rep.reject)
        assert 0.02 <= hits / 200 <= 0.09

    def test_zero_added_column(self):
        rng = substream(314, "glm", "robust-zero")
        n = 100
        X = np.ones((n, 1))
        y = (rng.random(n) < 0.5).astype(float)
        rep = robust_score_test(X, y, np.zeros((n, 1)), np.arange(n) // 2)
        assert rep.statistic == 0.0


class TestPooledRows:
    def test_stacking_matches_manual_replication(self):
        schema = Schema((binary(), binary()), (binary(), binary()))
        ds = Dataset(schema,
                     [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                     [[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]],
                     [5.0, 6.0, 7.0])
        X, resp, subj, occ = pooled_rows(ds, ("1", "lm", "a_prev"))
        assert X.shape == (6, 3)
        # occasion 0 block: lm = L0, a_prev = 0
        np.testing.assert_array_equal(X[:3, 1], ds.L[:, 0])
        np.testing.assert_array_equal(X[:3, 2], np.zeros(3))
        np.testing.assert_array_equal(resp[:3], ds.A[:, 0])
        # occasion 1 block: lm = L1, a_prev = A0
        np.testing.assert_array_equal(X[3:, 1], ds.L[:, 1])
        np.testing.assert_array_equal(X[3:, 2], ds.A[:, 0])
        np.testing.assert_array_equal(resp[3:], ds.A[:, 1])
        np.testing.assert_array_equal(subj, [0, 1, 2, 0, 1, 2])
        np.testing.assert_array_equal(occ, [0, 0, 0, 1, 1, 1])

    def test_extra_column_broadcasts_to_every_occasion(self):
        schema = Schema((binary(), binary()), (binary(), binary()))
        ds = Dataset(schema, [[1.0, 0.0]], [[1.0, 0.0]], [5.0])
        h = np.array([9.0])
        X, _, _, _ = pooled_rows(ds, ("h",), extra={"h": h})
        np.testing.assert_array_equal(X[:, 0], [9.0, 9.0])
