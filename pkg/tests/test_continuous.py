import numpy as np
import pytest

from smrmom import (
    ContinuousProblem,
    FactorModel,
    Hyperparameters,
    OutcomeMatrix,
)
from smrmom.continuous import (
    fit_continuous,
    grad_A_continuous,
    grad_Gamma_continuous,
    objective_continuous,
    update_A,
    update_B,
    update_Gamma,
)
from smrmom.losses import bind_loss
from smrmom.solver import orthonormal_polar

from conftest import fd_gradient, make_problem, random_model, random_orthonormal, rel_err
from oracles import exact_als_oracle, restart_oracle

from dataclasses import replace


def objective_oracle(prob, model):
    """Independent term-by-term recomputation of the composite objective."""
    X, t, Y = prob.X.values, prob.t.labels, prob.Y.values
    h = prob.hyper
    resid = Y - 0.5 * np.diag(t) @ X @ model.A @ model.Gamma
    recon = X - X @ model.A @ model.B.T
    val = np.linalg.norm(resid, "fro") ** 2
    val += h.omega * np.linalg.norm(recon, "fro") ** 2
    val += h.lambda_a * sum(np.abs(model.A[:, k]).sum() for k in range(model.d))
    val += h.lambda_gamma * sum(np.abs(model.Gamma[:, l]).sum() for l in range(model.p))
    return val


class TestObjective:
    def test_zero_model(self):
        prob = make_problem(seed=1, lambda_a=0.3, lambda_gamma=0.2)
        q, d, p = 6, 2, 3
        model = FactorModel(A=np.zeros((q, d)), B=np.eye(q)[:, :d], Gamma=np.zeros((d, p)))
        expected = (
            np.sum(prob.Y.values**2) + prob.hyper.omega * np.sum(prob.X.values**2)
        )
        assert objective_continuous(prob, model) == pytest.approx(expected, rel=1e-13)

    def test_penalty_additivity(self):
        # zero data: adding c to one loading raises the objective by
        # lambda_a * |c| plus the reconstruction change; with omega-term
        # isolated via B = A basis the penalty difference is exact
        prob = make_problem(seed=2, lambda_a=0.7)
        Y0 = OutcomeMatrix(np.zeros((prob.n, prob.p)), "continuous")
        prob = replace(prob, Y=Y0)
        q, d = 6, 2
        A = np.zeros((q, d))
        base_model = FactorModel(A=A, B=np.eye(q)[:, :d], Gamma=np.zeros((d, prob.p)))
        bumped = A.copy()
        bumped[3, 1] = -1.3
        bumped_model = replace(base_model, A=bumped)
        base = objective_continuous(prob, base_model)
        bump = objective_continuous(prob, bumped_model)
        recon_change = prob.hyper.omega * (
            np.linalg.norm(prob.X.values - prob.X.values @ bumped @ base_model.B.T, "fro") ** 2
            - np.linalg.norm(prob.X.values, "fro") ** 2
        )
        assert bump - base - recon_change == pytest.approx(0.7 * 1.3, rel=1e-10)

    def test_matches_independent_recomputation(self):
        prob = make_problem(n=5, m=3, p=2, d=2, seed=3, lambda_a=0.11, lambda_gamma=0.23)
        model = random_model(prob, seed=4)
        assert objective_continuous(prob, model) == pytest.approx(
            objective_oracle(prob, model), rel=1e-12
        )


class TestGradients:
    def test_grad_A_at_zero_loading(self):
        prob = make_problem(seed=5)
        model = random_model(prob, seed=6)
        zeroA = replace(model, A=np.zeros_like(model.A))
        X, t, Y = prob.X.values, prob.t.labels, prob.Y.values
        expected = (
            -X.T @ (t[:, None] * Y) @ zeroA.Gamma.T
            - 2.0 * prob.hyper.omega * (X.T @ X) @ zeroA.B
        )
        np.testing.assert_allclose(grad_A_continuous(prob, zeroA), expected, atol=1e-10)

    def test_grad_A_finite_differences(self):
        prob = make_problem(n=12, m=4, p=3, d=2, seed=7)
        model = random_model(prob, seed=8)
        loss = bind_loss("gaussian", prob)

        def smooth(A):
            recon = prob.X.values - prob.X.values @ A @ model.B.T
            return loss.value(A, model.Gamma) + prob.hyper.omega * np.sum(recon**2)

        num = fd_gradient(smooth, model.A)
        assert rel_err(grad_A_continuous(prob, model), num) <= 1e-5

    def test_grad_Gamma_finite_differences(self):
        prob = make_problem(n=12, m=4, p=3, d=2, seed=9)
        model = random_model(prob, seed=10)
        loss = bind_loss("gaussian", prob)
        num = fd_gradient(lambda G: loss.value(model.A, G), model.Gamma)
        assert rel_err(grad_Gamma_continuous(prob, model), num) <= 1e-5

    def test_grad_Gamma_at_zero(self):
        prob = make_problem(seed=11)
        model = random_model(prob, seed=12)
        zeroG = replace(model, Gamma=np.zeros_like(model.Gamma))
        X, t, Y = prob.X.values, prob.t.labels, prob.Y.values
        expected = -zeroG.A.T @ X.T @ (t[:, None] * Y)
        np.testing.assert_allclose(grad_Gamma_continuous(prob, zeroG), expected, atol=1e-10)

    def test_grad_Gamma_zero_loading_annihilates(self):
        prob = make_problem(seed=13)
        model = random_model(prob, seed=14)
        zeroA = replace(model, A=np.zeros_like(model.A))
        np.testing.assert_array_equal(
            grad_Gamma_continuous(prob, zeroA), np.zeros_like(model.Gamma)
        )

    def test_stationary_point_has_zero_gradients(self, rng):
        # A orthonormal, B = A, outcomes generated exactly by the model:
        # both gradients vanish
        prob = make_problem(n=15, m=4, p=3, d=2, seed=15)
        A = random_orthonormal(5, 2, rng)
        Gamma = rng.standard_normal((2, 3))
        Y = OutcomeMatrix(
            0.5 * prob.t.labels[:, None] * (prob.X.values @ A @ Gamma), "continuous"
        )
        prob = replace(prob, Y=Y)
        model = FactorModel(A=A, B=A.copy(), Gamma=Gamma)
        assert np.abs(grad_A_continuous(prob, model)).max() <= 1e-10
        assert np.abs(grad_Gamma_continuous(prob, model)).max() <= 1e-10


class TestUpdateA:
    def test_full_shrinkage(self):
        prob = make_problem(seed=16, lambda_a=1e9)
        model = random_model(prob, seed=17)
        np.testing.assert_array_equal(update_A(prob, model), np.zeros_like(model.A))

    def test_zero_penalty_is_gradient_step(self):
        prob = make_problem(seed=18, lambda_a=0.0, step_a=0.01)
        model = random_model(prob, seed=19)
        expected = model.A - 0.01 * grad_A_continuous(prob, model)
        np.testing.assert_allclose(update_A(prob, model), expected, atol=1e-14)

    def test_reproduces_soft_threshold(self):
        prob = make_problem(seed=20, lambda_a=0.15, step_a=0.02)
        model = random_model(prob, seed=21)
        dag = model.A - 0.02 * grad_A_continuous(prob, model)
        expected = np.sign(dag) * np.maximum(np.abs(dag) - 0.15, 0.0)
        np.testing.assert_allclose(update_A(prob, model), expected, atol=1e-14)

    def test_standard_scaling_thresholds_by_step_times_lambda(self):
        prob = make_problem(seed=22, lambda_a=0.5, step_a=0.02, prox_scaling="standard")
        model = random_model(prob, seed=23)
        dag = model.A - 0.02 * grad_A_continuous(prob, model)
        expected = np.sign(dag) * np.maximum(np.abs(dag) - 0.01, 0.0)
        np.testing.assert_allclose(update_A(prob, model), expected, atol=1e-14)

    def test_non_finite_gradient_raises(self):
        prob = make_problem(seed=24)
        model = random_model(prob, seed=25)
        bad = replace(model, Gamma=model.Gamma * np.inf)
        with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
            update_A(prob, bad)


class TestUpdateB:
    def test_polar_of_orthonormal_is_identity_map(self, rng):
        A = random_orthonormal(6, 3, rng)
        np.testing.assert_allclose(orthonormal_polar(A), A, atol=1e-12)

    def test_orthonormal_columns(self):
        prob = make_problem(seed=26)
        model = random_model(prob, seed=27)
        B = update_B(prob, model)
        np.testing.assert_allclose(B.T @ B, np.eye(model.d), atol=1e-8)

    def test_procrustes_beats_random_candidates(self, rng):
        prob = make_problem(seed=28)
        model = random_model(prob, seed=29)
        M = prob.X.values.T @ prob.X.values @ model.A
        best = np.trace(update_B(prob, model).T @ M)
        for _ in range(200):
            Bc = random_orthonormal(M.shape[0], M.shape[1], rng)
            assert np.trace(Bc.T @ M) <= best + 1e-9

    def test_rank_one_direction_is_normalized(self):
        prob = make_problem(d=1, seed=30)
        model = random_model(prob, seed=31)
        Ma = prob.X.values.T @ prob.X.values @ model.A
        np.testing.assert_allclose(
            update_B(prob, model), Ma / np.linalg.norm(Ma), atol=1e-12
        )

    def test_rank_deficient_completion_is_deterministic(self):
        prob = make_problem(seed=32)
        zero_model = FactorModel(
            A=np.zeros((6, 2)), B=np.eye(6)[:, :2], Gamma=np.zeros((2, 3))
        )
        B1 = update_B(prob, zero_model)
        B2 = update_B(prob, zero_model)
        np.testing.assert_array_equal(B1, B2)
        np.testing.assert_allclose(B1.T @ B1, np.eye(2), atol=1e-10)

    def test_partially_rank_deficient(self):
        prob = make_problem(seed=33)
        A = np.zeros((6, 2))
        A[:, 0] = [1.0, 2.0, 0.0, 1.0, -1.0, 0.5]
        A[:, 1] = 2.0 * A[:, 0]
        model = FactorModel(A=A, B=np.eye(6)[:, :2], Gamma=np.zeros((2, 3)))
        B = update_B(prob, model)
        np.testing.assert_allclose(B.T @ B, np.eye(2), atol=1e-8)


class TestUpdateGamma:
    def test_full_shrinkage(self):
        prob = make_problem(seed=34, lambda_gamma=1e9)
        model = random_model(prob, seed=35)
        np.testing.assert_array_equal(update_Gamma(prob, model), np.zeros_like(model.Gamma))

    def test_zero_penalty_is_gradient_step(self):
        prob = make_problem(seed=36, lambda_gamma=0.0, step_gamma=0.05)
        model = random_model(prob, seed=37)
        expected = model.Gamma - 0.05 * grad_Gamma_continuous(prob, model)
        np.testing.assert_allclose(update_Gamma(prob, model), expected, atol=1e-14)

    def test_reproduces_soft_threshold(self):
        prob = make_problem(seed=38, lambda_gamma=0.2, step_gamma=0.05)
        model = random_model(prob, seed=39)
        dag = model.Gamma - 0.05 * grad_Gamma_continuous(prob, model)
        expected = np.sign(dag) * np.maximum(np.abs(dag) - 0.2, 0.0)
        np.testing.assert_allclose(update_Gamma(prob, model), expected, atol=1e-14)


class TestFitContinuous:
    def test_huge_penalties_give_zero_model(self):
        prob = make_problem(seed=40, lambda_a=1e8, lambda_gamma=1e8)
        res = fit_continuous(prob)
        assert np.all(res.model.A == 0) and np.all(res.model.Gamma == 0)
        expected = np.sum(prob.Y.values**2) + prob.hyper.omega * np.sum(prob.X.values**2)
        assert res.objective == pytest.approx(expected, rel=1e-12)

    def test_matches_restart_oracle_on_small_instances(self):
        for seed in (0, 1):
            prob = make_problem(
                n=20, m=3, p=2, d=1, seed=seed,
                lambda_a=0.0, lambda_gamma=0.0, omega=0.01,
                max_sweeps=5000, tol=1e-10,
            )
            res = fit_continuous(prob)
            best = restart_oracle(prob, restarts=50, seed=seed)
            assert res.objective <= best + 1e-4

    def test_one_extra_sweep_at_oracle_solution_is_fixed_point(self):
        prob = make_problem(
            n=20, m=3, p=2, d=1, seed=2,
            lambda_a=0.0, lambda_gamma=0.0, omega=0.01, max_sweeps=1,
        )
        _, oracle_model = exact_als_oracle(prob, fit_continuous(prob).model.A)
        res = fit_continuous(prob, init=oracle_model)
        trace = res.objective_trace
        assert abs(trace[-1] - trace[0]) < 1e-8

    def test_objective_trace_monotone(self):
        prob = make_problem(seed=41, lambda_a=0.1, lambda_gamma=0.1, tol=1e-9)
        res = fit_continuous(prob)
        assert np.all(np.diff(res.objective_trace) <= 1e-10)

    def test_orthonormal_B_after_fit(self):
        prob = make_problem(seed=42, lambda_a=0.05, lambda_gamma=0.05)
        res = fit_continuous(prob)
        assert np.abs(res.model.B.T @ res.model.B - np.eye(prob.hyper.d)).max() <= 1e-8

    def test_deterministic_across_runs(self):
        prob = make_problem(seed=43, lambda_a=0.02, lambda_gamma=0.04)
        r1 = fit_continuous(prob, seed=9)
        r2 = fit_continuous(prob, seed=9)
        assert np.array_equal(r1.model.A, r2.model.A)
        assert np.array_equal(r1.model.B, r2.model.B)
        assert np.array_equal(r1.model.Gamma, r2.model.Gamma)
        assert np.array_equal(r1.objective_trace, r2.objective_trace)
        assert np.array_equal(r1.effect, r2.effect)

    def test_sparsity_monotone_in_lambda_a(self):
        # fixed data, fixed steps and sweep count: stronger penalties keep
        # fewer loadings
        nnz = []
        for lam in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8):
            prob = make_problem(
                seed=44, lambda_a=lam, lambda_gamma=0.05,
                step_a=0.005, step_gamma=0.01, max_sweeps=5, tol=1e-30,
            )
            res = fit_continuous(prob)
            nnz.append(int(np.sum(res.model.A != 0)))
        assert all(a >= b for a, b in zip(nnz, nnz[1:]))

    def test_non_convergence_flagged(self):
        prob = make_problem(seed=45, max_sweeps=1, tol=1e-16)
        res = fit_continuous(prob)
        assert res.converged is False

    def test_effect_matches_treatment_effect(self):
        from smrmom import treatment_effect

        prob = make_problem(seed=46, lambda_a=0.05, lambda_gamma=0.05)
        res = fit_continuous(prob)
        np.testing.assert_array_equal(res.effect, treatment_effect(prob.X, res.model))

    def test_kind_validation(self):
        bin_prob = make_problem("binary", seed=47)
        with pytest.raises(ValueError):
            ContinuousProblem(X=bin_prob.X, t=bin_prob.t, Y=bin_prob.Y, hyper=bin_prob.hyper)
