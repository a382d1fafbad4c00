import warnings
from dataclasses import replace

import numpy as np
import pytest

from smrmom import (
    DesignMatrix,
    FactorModel,
    Hyperparameters,
    OutcomeMatrix,
    fit_binary,
    fit_continuous,
    fit_full_simultaneous,
    fit_full_tandem,
    fit_lasso_logistic_multi,
    fit_lasso_multi,
    fit_mom_tandem,
    fit_spca,
)
from smrmom.baselines import FullModel, _lasso_path, _logistic_lasso_path
from smrmom.losses import bind_loss
from smrmom.solver import ConvergenceWarning

from conftest import fd_gradient, make_problem, random_model, rel_err


class TestFitSpca:
    def test_exact_recovery_of_low_rank_design(self, rng):
        v = rng.standard_normal(12)
        raw = np.column_stack([v, 2.0 * v - 3.0, 1.0 + v])  # rank 2 with intercept
        X = DesignMatrix(np.hstack([np.ones((12, 1)), raw]))
        A, B = fit_spca(X, 2, 0.0, 0.1, tol=1e-12)
        recon = X.values - X.values @ A @ B.T
        assert np.linalg.norm(recon, "fro") < 1e-8

    def test_huge_penalty_zeroes_loadings(self):
        prob = make_problem(seed=1)
        A, B = fit_spca(prob.X, 2, 1e9, 0.1)
        np.testing.assert_array_equal(A, np.zeros_like(A))

    def test_orthonormal_B(self):
        prob = make_problem(seed=2)
        A, B = fit_spca(prob.X, 2, 0.01, 0.1)
        np.testing.assert_allclose(B.T @ B, np.eye(2), atol=1e-8)

    def test_warns_when_not_converged(self):
        prob = make_problem(seed=3)
        with pytest.warns(ConvergenceWarning):
            fit_spca(prob.X, 2, 0.5, 0.1, max_sweeps=1, tol=1e-16, prox_scaling="standard")

    def test_d_bound(self):
        prob = make_problem(seed=4)
        with pytest.raises(ValueError):
            fit_spca(prob.X, 6, 0.0, 0.1)


class TestLassoMulti:
    def test_zero_penalty_matches_normal_equations(self, rng):
        F = rng.standard_normal((40, 4))
        Z = rng.standard_normal((40, 3))
        G = fit_lasso_multi(F, Z, 0.0)
        expected = np.linalg.lstsq(F, Z, rcond=None)[0]
        assert np.abs(G - expected).max() <= 1e-6

    def test_huge_penalty_zeroes_coefficients(self, rng):
        F = rng.standard_normal((20, 3))
        Z = rng.standard_normal((20, 2))
        np.testing.assert_array_equal(fit_lasso_multi(F, Z, 1e9), np.zeros((3, 2)))

    def test_kkt_conditions(self, rng):
        F = rng.standard_normal((50, 6))
        Z = rng.standard_normal((50, 4)) * 2.0
        lam = 8.0
        G = fit_lasso_multi(F, Z, lam)
        corr = F.T @ (Z - F @ G)
        zero = G == 0
        assert np.all(np.abs(corr[zero]) <= lam + 1e-6)
        active = ~zero
        assert np.abs(corr[active] - lam * np.sign(G[active])).max() <= 1e-5

    def test_per_row_penalty_vector(self, rng):
        F = rng.standard_normal((30, 4))
        Z = rng.standard_normal((30, 2))
        lam = np.array([0.0, 1e9, 0.0, 1e9])
        G = fit_lasso_multi(F, Z, lam)
        assert np.all(G[1] == 0) and np.all(G[3] == 0)
        assert np.any(G[0] != 0)

    def test_objective_trace_monotone(self, rng):
        F = rng.standard_normal((30, 4))
        Z = rng.standard_normal((30, 2))
        _, trace, converged = _lasso_path(F, Z, 2.0)
        assert converged
        assert np.all(np.diff(trace) <= 1e-10)


class TestLassoLogisticMulti:
    def test_huge_penalty_zeroes_coefficients(self, rng):
        F = rng.standard_normal((25, 3))
        Y = (rng.standard_normal((25, 2)) > 0).astype(float)
        t = rng.integers(0, 2, 25) * 2.0 - 1.0
        np.testing.assert_array_equal(
            fit_lasso_logistic_multi(F, Y, t, 1e9), np.zeros((3, 2))
        )

    def test_gradient_matches_finite_differences(self, rng):
        # oracle: numeric gradient of the capped-logit objective core
        from scipy.special import expit

        W = rng.standard_normal((20, 3))
        Y = (rng.standard_normal((20, 2)) > 0).astype(float)
        G0 = 0.3 * rng.standard_normal((3, 2))

        def nll(G):
            z = W @ G
            return float(np.sum(np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z))) - Y * z))

        analytic = W.T @ (expit(W @ G0) - Y)
        numeric = fd_gradient(nll, G0)
        assert rel_err(analytic, numeric) <= 1e-5

    def test_kkt_stationarity(self, rng):
        from scipy.special import expit

        F = rng.standard_normal((60, 4))
        Y = (rng.standard_normal((60, 3)) > 0).astype(float)
        t = rng.integers(0, 2, 60) * 2.0 - 1.0
        lam = 1.5
        G = fit_lasso_logistic_multi(F, Y, t, lam, tol=1e-10)
        W = 0.5 * t[:, None] * F
        grad = W.T @ (expit(W @ G) - Y)
        zero = G == 0
        assert np.all(np.abs(grad[zero]) <= lam + 1e-6)
        capped = np.abs(G) >= 30.0
        active = (~zero) & (~capped)
        assert np.abs(grad[active] + lam * np.sign(G[active])).max() <= 1e-5

    def test_complete_separation_capped(self):
        # one perfectly separating score: the coefficient walks to the cap
        f = np.linspace(-2, 2, 30)
        F = f.reshape(-1, 1)
        t = np.ones(30)
        Y = (f > 0).astype(float).reshape(-1, 1)
        G = fit_lasso_logistic_multi(F, Y, t, 0.0, max_iter=200000)
        assert abs(G[0, 0]) <= 30.0
        assert G[0, 0] == pytest.approx(30.0)


class TestMomTandem:
    def test_huge_penalties_give_zero_effect(self):
        prob = make_problem(seed=10, lambda_a=1e9, lambda_gamma=1e9)
        res = fit_mom_tandem(prob)
        np.testing.assert_array_equal(res.effect, np.zeros((prob.n, prob.p)))

    def test_binary_variant_runs(self):
        prob = make_problem("binary", seed=11, lambda_a=0.1, lambda_gamma=0.5)
        res = fit_mom_tandem(prob)
        assert res.kind == "binary"
        assert res.effect.shape == (prob.n, prob.p)

    def test_deterministic_stage_output(self):
        prob = make_problem(seed=12, lambda_a=0.2, lambda_gamma=1.0)
        r1 = fit_mom_tandem(prob, seed=5)
        r2 = fit_mom_tandem(prob, seed=5)
        assert np.array_equal(r1.model.A, r2.model.A)
        assert np.array_equal(r1.model.Gamma, r2.model.Gamma)

    def test_gamma_solves_lasso_on_frozen_scores(self):
        prob = make_problem(seed=13, lambda_a=0.05, lambda_gamma=2.0)
        res = fit_mom_tandem(prob)
        F = prob.X.values @ res.model.A
        target = 2.0 * prob.t.labels[:, None] * prob.Y.values
        expected = fit_lasso_multi(F, target, 2.0)
        np.testing.assert_allclose(res.model.Gamma, expected, atol=1e-12)

    def test_trace_monotone(self):
        prob = make_problem(seed=14, lambda_a=0.05, lambda_gamma=0.7)
        res = fit_mom_tandem(prob)
        assert np.all(np.diff(res.objective_trace) <= 1e-10)


class TestFullTandem:
    def test_huge_penalties_give_zero_model(self):
        prob = make_problem(seed=20, lambda_a=1e9, lambda_gamma=1e9)
        res = fit_full_tandem(prob)
        np.testing.assert_array_equal(res.model.Gamma, np.zeros_like(res.model.Gamma))
        np.testing.assert_array_equal(res.D, np.zeros_like(res.D))

    def test_joint_regression_blocks(self):
        # solution solves one lasso on the stacked [X, scores] design
        prob = make_problem(seed=21, lambda_a=0.05, lambda_gamma=1.3)
        res = fit_full_tandem(prob)
        X = prob.X.values
        W = np.hstack([X, 0.5 * prob.t.labels[:, None] * (X @ res.model.A)])
        coef = fit_lasso_multi(W, prob.Y.values, 1.3)
        np.testing.assert_allclose(np.vstack([res.D, res.model.Gamma]), coef, atol=1e-12)

    def test_lambda_d_override(self):
        prob = make_problem(
            seed=22, lambda_a=0.05, lambda_gamma=0.5, lambda_d=1e9
        )
        res = fit_full_tandem(prob)
        np.testing.assert_array_equal(res.D, np.zeros_like(res.D))

    def test_binary_variant_runs(self):
        prob = make_problem("binary", seed=23, lambda_a=0.1, lambda_gamma=0.4)
        res = fit_full_tandem(prob)
        assert res.D is not None and res.D.shape == (6, prob.p)


class TestFullSimultaneous:
    def test_d_gradient_finite_differences_gaussian(self):
        prob = make_problem(seed=30)
        model = random_model(prob, seed=31)
        loss = bind_loss("gaussian", prob)
        D0 = 0.2 * np.random.default_rng(32).standard_normal((6, prob.p))
        analytic = loss.grad_D(model.A, model.Gamma, D0)
        numeric = fd_gradient(lambda D: loss.value(model.A, model.Gamma, D), D0)
        assert rel_err(analytic, numeric) <= 1e-5

    def test_d_gradient_finite_differences_bernoulli(self):
        prob = make_problem("binary", seed=33)
        model = random_model(prob, seed=34)
        loss = bind_loss("bernoulli", prob)
        D0 = 0.2 * np.random.default_rng(35).standard_normal((6, prob.p))
        analytic = loss.grad_D(model.A, model.Gamma, D0)
        numeric = fd_gradient(lambda D: loss.value(model.A, model.Gamma, D), D0)
        assert rel_err(analytic, numeric) <= 1e-5

    def test_pinned_d_reproduces_continuous_bitwise(self):
        prob = make_problem(seed=36, lambda_a=0.04, lambda_gamma=0.06)
        base = fit_continuous(prob, seed=2)
        pinned = fit_full_simultaneous(prob, seed=2, lambda_d=np.inf)
        assert np.array_equal(pinned.model.A, base.model.A)
        assert np.array_equal(pinned.model.B, base.model.B)
        assert np.array_equal(pinned.model.Gamma, base.model.Gamma)
        assert np.array_equal(pinned.objective_trace, base.objective_trace)
        assert np.array_equal(pinned.effect, base.effect)
        assert np.all(pinned.D == 0)

    def test_pinned_d_reproduces_binary_bitwise(self):
        prob = make_problem("binary", seed=37, lambda_a=0.04, lambda_gamma=0.06)
        base = fit_binary(prob, seed=2)
        pinned = fit_full_simultaneous(prob, seed=2, lambda_d=np.inf)
        assert np.array_equal(pinned.model.A, base.model.A)
        assert np.array_equal(pinned.objective_trace, base.objective_trace)
        assert np.array_equal(pinned.effect, base.effect)

    def test_huge_penalties_give_zero_model(self):
        prob = make_problem(seed=38, lambda_a=1e8, lambda_gamma=1e8, lambda_d=1e8)
        res = fit_full_simultaneous(prob)
        assert np.all(res.model.A == 0) and np.all(res.model.Gamma == 0)
        assert np.all(res.D == 0)

    def test_monotone_trace_with_d_block(self):
        prob = make_problem(seed=39, lambda_a=0.02, lambda_gamma=0.05)
        res = fit_full_simultaneous(prob)
        assert np.all(np.diff(res.objective_trace) <= 1e-10)

    def test_effect_shape_contract(self):
        prob = make_problem(seed=40, lambda_a=0.02, lambda_gamma=0.05)
        for fitter in (fit_mom_tandem, fit_full_tandem, fit_full_simultaneous):
            res = fitter(prob)
            assert res.effect.shape == (prob.n, prob.p)


class TestFullModelType:
    def test_shape_validation(self):
        model = FactorModel(A=np.zeros((6, 2)), B=np.eye(6)[:, :2], Gamma=np.zeros((2, 3)))
        FullModel(D=np.zeros((6, 3)), factors=model)
        with pytest.raises(ValueError):
            FullModel(D=np.zeros((5, 3)), factors=model)
