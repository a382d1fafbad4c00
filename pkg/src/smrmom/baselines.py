"""Comparison estimators: tandem pipelines and the penalized full model.

Tandem estimators run sparse PCA on the design first and regress outcomes
on the frozen scores afterwards; the simultaneous full model adds an
explicit main-effect block D to the alternating solver.  All estimators
return the same effect-matrix contract, so the benchmark scores them
interchangeably.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .core import log1p_exp
from .losses import NullLoss, bind_loss, _spectral_norm
from .solver import fit_als, warn_if_not_converged
from .types import (
    DesignMatrix,
    FactorModel,
    FitResult,
    Hyperparameters,
    Problem,
)

_LASSO_TRACE_STRIDE = 25


@dataclass(frozen=True)
class FullModel:
    """Main-effect coefficients plus the interaction factor model."""

    D: np.ndarray
    factors: FactorModel

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        if D.shape != (self.factors.A.shape[0], self.factors.p):
            raise ValueError(
                f"D shape {D.shape} inconsistent with factors "
                f"({self.factors.A.shape[0]} x {self.factors.p})"
            )
        object.__setattr__(self, "D", D)


def fit_spca(
    X: DesignMatrix,
    d: int,
    lambda_a: float,
    omega: float,
    *,
    max_sweeps: int = 1000,
    tol: float = 1e-6,
    step: float | str = "auto",
    prox_scaling: str = "paper",
    init: FactorModel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse PCA: minimize omega ||X - X A B'||_F^2 + lambda_a sum ||a_k||_1
    over A and orthonormal B, by alternating prox-on-A / SVD-on-B."""
    if d > X.m:
        raise ValueError("component count d must not exceed the covariate count m")
    hyper = Hyperparameters(
        d=d, omega=omega, lambda_a=lambda_a, lambda_gamma=0.0,
        step_a=step, max_sweeps=max_sweeps, tol=tol, prox_scaling=prox_scaling,
    )
    res = fit_als(NullLoss(X.values), hyper, kind="spca", init=init)
    warn_if_not_converged(res, "sparse PCA")
    return res.model.A, res.model.B


def _lasso_path(F, Z, lam, *, tol=1e-8, max_iter=50000):
    """Proximal gradient for 0.5||Z - F G||_F^2 + sum_l <lam, |g_l|>.

    ``lam`` is a scalar or per-row penalty vector.  Returns (G, objective
    trace, converged flag).
    """
    F = np.asarray(F, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if F.shape[0] != Z.shape[0]:
        raise ValueError(f"score rows {F.shape[0]} != target rows {Z.shape[0]}")
    lam_col = np.broadcast_to(np.asarray(lam, dtype=float), (F.shape[1],))[:, None]
    FtF = F.T @ F
    FtZ = F.T @ Z
    L = _spectral_norm(FtF)
    G = np.zeros((F.shape[1], Z.shape[1]))

    def objective(G_):
        R = Z - F @ G_
        return 0.5 * float(np.sum(R * R)) + float(np.sum(lam_col * np.abs(G_)))

    trace = [objective(G)]
    if L == 0.0:
        return G, np.asarray(trace), True
    alpha = 1.0 / L
    converged = False
    for it in range(max_iter):
        grad = FtF @ G - FtZ
        G_new = np.sign(G - alpha * grad) * np.maximum(
            np.abs(G - alpha * grad) - alpha * lam_col, 0.0
        )
        delta = float(np.max(np.abs(G_new - G)))
        G = G_new
        if (it + 1) % _LASSO_TRACE_STRIDE == 0:
            trace.append(objective(G))
        if delta <= tol:
            converged = True
            break
    trace.append(objective(G))
    return G, np.asarray(trace), converged


def _logistic_lasso_path(W, Y, lam, *, tol=1e-8, max_iter=50000, cap=30.0):
    """Proximal gradient for the L1-penalized Bernoulli loss with logits W G.

    Coefficients are capped at +-cap so complete separation cannot run away.
    """
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if W.shape[0] != Y.shape[0]:
        raise ValueError(f"score rows {W.shape[0]} != outcome rows {Y.shape[0]}")
    lam_col = np.broadcast_to(np.asarray(lam, dtype=float), (W.shape[1],))[:, None]
    WtW = W.T @ W
    L = _spectral_norm(WtW) / 4.0
    G = np.zeros((W.shape[1], Y.shape[1]))

    def objective(G_):
        z = W @ G_
        return float(np.sum(log1p_exp(z) - Y * z)) + float(np.sum(lam_col * np.abs(G_)))

    trace = [objective(G)]
    if L == 0.0:
        return G, np.asarray(trace), True
    alpha = 1.0 / L
    converged = False
    for it in range(max_iter):
        grad = W.T @ (expit(W @ G) - Y)
        step = G - alpha * grad
        G_new = np.sign(step) * np.maximum(np.abs(step) - alpha * lam_col, 0.0)
        np.clip(G_new, -cap, cap, out=G_new)
        delta = float(np.max(np.abs(G_new - G)))
        G = G_new
        if (it + 1) % _LASSO_TRACE_STRIDE == 0:
            trace.append(objective(G))
        if delta <= tol:
            converged = True
            break
    trace.append(objective(G))
    return G, np.asarray(trace), converged


def fit_lasso_multi(F, Z, lam, *, tol=1e-8, max_iter=50000) -> np.ndarray:
    """Per-column L1-penalized least squares of targets Z on scores F."""
    G, _, _ = _lasso_path(F, Z, lam, tol=tol, max_iter=max_iter)
    return G


def fit_lasso_logistic_multi(F, Y, t, lam, *, tol=1e-8, max_iter=50000, cap=30.0) -> np.ndarray:
    """Per-column L1-penalized logistic fit with fixed latent scores F.

    Logits are t_i * f_i' gamma_j / 2, matching the latent binary model.
    """
    t = np.asarray(t, dtype=float).ravel()
    W = 0.5 * t[:, None] * np.asarray(F, dtype=float)
    G, _, _ = _logistic_lasso_path(W, Y, lam, tol=tol, max_iter=max_iter, cap=cap)
    return G


def _resolve(prob: Problem, hyper: Hyperparameters | None) -> Hyperparameters:
    return prob.hyper if hyper is None else hyper


def _spca_stage(prob: Problem, hyper: Hyperparameters):
    res = fit_als(
        NullLoss(prob.X.values),
        replace(hyper, lambda_gamma=0.0),
        kind="spca",
    )
    return res.model.A, res.model.B, res


def _lambda_d(hyper: Hyperparameters) -> float:
    return hyper.lambda_d if hyper.lambda_d is not None else hyper.lambda_gamma


def fit_mom_tandem(
    prob: Problem, hyper: Hyperparameters | None = None, seed: int | None = None
) -> FitResult:
    """Sparse PCA on the design, then a (logistic) lasso of the modified
    outcomes on the frozen scores."""
    hyper = _resolve(prob, hyper)
    A, B, spca_res = _spca_stage(prob, hyper)
    F = prob.X.values @ A
    if prob.Y.kind == "continuous":
        target = 2.0 * prob.t.labels[:, None] * prob.Y.values
        G, trace, conv = _lasso_path(F, target, hyper.lambda_gamma)
    elif prob.Y.kind == "binary":
        W = 0.5 * prob.t.labels[:, None] * F
        G, trace, conv = _logistic_lasso_path(W, prob.Y.values, hyper.lambda_gamma)
    else:
        raise ValueError(f"tandem baseline supports continuous/binary outcomes, got {prob.Y.kind!r}")
    model = FactorModel(A=A, B=B, Gamma=G)
    return FitResult(
        model=model,
        effect=prob.X.values @ A @ G,
        objective_trace=trace,
        converged=bool(spca_res.converged and conv),
        hyper=hyper,
        kind=prob.Y.kind,
        seed=seed,
        metadata={
            "estimator": "mom-tandem",
            "spca_variant": "pca-loss+l1",
            "spca_trace": spca_res.objective_trace.tolist(),
            "trace_block": "lasso-stage",
        },
    )


def fit_full_tandem(
    prob: Problem, hyper: Hyperparameters | None = None, seed: int | None = None
) -> FitResult:
    """Sparse PCA on the design, then one joint (logistic) lasso of the raw
    outcomes on the main-effect and interaction column blocks."""
    hyper = _resolve(prob, hyper)
    A, B, spca_res = _spca_stage(prob, hyper)
    X = prob.X.values
    q = X.shape[1]
    scores = 0.5 * prob.t.labels[:, None] * (X @ A)
    W = np.hstack([X, scores])
    lam_vec = np.concatenate([
        np.full(q, _lambda_d(hyper)), np.full(hyper.d, hyper.lambda_gamma)
    ])
    if prob.Y.kind == "continuous":
        coef, trace, conv = _lasso_path(W, prob.Y.values, lam_vec)
    elif prob.Y.kind == "binary":
        coef, trace, conv = _logistic_lasso_path(W, prob.Y.values, lam_vec)
    else:
        raise ValueError(f"tandem baseline supports continuous/binary outcomes, got {prob.Y.kind!r}")
    D, G = coef[:q], coef[q:]
    model = FactorModel(A=A, B=B, Gamma=G)
    return FitResult(
        model=model,
        effect=X @ A @ G,
        objective_trace=trace,
        converged=bool(spca_res.converged and conv),
        hyper=hyper,
        kind=prob.Y.kind,
        seed=seed,
        D=D,
        metadata={
            "estimator": "full-tandem",
            "spca_variant": "pca-loss+l1",
            "spca_trace": spca_res.objective_trace.tolist(),
            "trace_block": "lasso-stage",
        },
    )


def fit_full_simultaneous(
    prob: Problem,
    hyper: Hyperparameters | None = None,
    seed: int | None = None,
    lambda_d: float | None = None,
    init: FactorModel | None = None,
) -> FitResult:
    """Joint alternating fit of the full model with a proximal step on D.

    ``lambda_d`` of ``inf`` pins D to zero, reproducing the pure
    modified-outcome fit exactly.
    """
    hyper = _resolve(prob, hyper)
    if prob.Y.kind not in ("continuous", "binary"):
        raise ValueError(
            f"full simultaneous baseline supports continuous/binary outcomes, got {prob.Y.kind!r}"
        )
    loss = bind_loss(
        "gaussian" if prob.Y.kind == "continuous" else "bernoulli", prob
    )
    lam_d = lambda_d if lambda_d is not None else _lambda_d(hyper)
    res = fit_als(
        loss, hyper, kind=prob.Y.kind, init=init, seed=seed,
        with_d=True, lambda_d=lam_d,
        extra_metadata={"estimator": "full-simultaneous", "lambda_d": lam_d},
    )
    return res
