"""Joint sparse estimation for multiple binary outcomes.

Replaces the squared loss with the negative Bernoulli log-likelihood of
the latent logistic model; the fitted effect matrix X A Gamma lives on
the log-odds-ratio scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import BernoulliLoss, bind_loss
from .solver import (
    composite_objective,
    fit_als,
    orthonormal_polar,
    pca_grad_A,
    prox_step,
    _resolve_base_step,
)
from .types import FactorModel, FitResult, Problem


@dataclass(frozen=True)
class BinaryProblem(Problem):
    def __post_init__(self):
        super().__post_init__()
        if self.Y.kind != "binary":
            raise ValueError(f"binary problem requires binary outcomes, got {self.Y.kind!r}")


def _loss(prob: Problem) -> BernoulliLoss:
    return bind_loss("bernoulli", prob)


def log_likelihood_binary(prob: BinaryProblem, model: FactorModel) -> float:
    """Bernoulli log-likelihood sum_ij [ y_ij z_ij - log(1 + exp(z_ij)) ]
    with z_ij = t_i (X A Gamma)_ij / 2, computed overflow-safe."""
    return -_loss(prob).value(model.A, model.Gamma)


def objective_binary(prob: BinaryProblem, model: FactorModel) -> float:
    """Negative log-likelihood plus reconstruction term plus L1 penalties."""
    return composite_objective(_loss(prob), prob.hyper, model.A, model.B, model.Gamma)


def grad_a_k_binary(prob: BinaryProblem, model: FactorModel, k: int) -> np.ndarray:
    """Log-likelihood derivative in the k-th column of A (0-based k).

    The reconstruction-term gradient is added by the update, not here.
    """
    if not 0 <= k < model.d:
        raise IndexError(f"component index {k} out of range for d={model.d}")
    return -_loss(prob).grad_A(model.A, model.Gamma)[:, k]


def grad_gamma_j_binary(prob: BinaryProblem, model: FactorModel, j: int) -> np.ndarray:
    """Log-likelihood derivative in the j-th column of Gamma (0-based j),
    summing over subjects only."""
    if not 0 <= j < model.p:
        raise IndexError(f"outcome index {j} out of range for p={model.p}")
    return -_loss(prob).grad_Gamma(model.A, model.Gamma)[:, j]


def update_A_binary(prob: BinaryProblem, model: FactorModel) -> np.ndarray:
    """One proximal gradient step on all columns of A."""
    loss = _loss(prob)
    grad = loss.grad_A(model.A, model.Gamma) + pca_grad_A(
        loss.XtX, model.A, model.B, prob.hyper.omega
    )
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient (divergent step size?)")
    lip = loss.lip_A(model.A, model.Gamma) + 2.0 * prob.hyper.omega * loss.norm_XtX
    base, _ = _resolve_base_step(prob.hyper.step_a, lip)
    return prox_step(model.A, grad, base, prob.hyper.lambda_a, prob.hyper.prox_scaling)


def update_B_binary(prob: BinaryProblem, model: FactorModel) -> np.ndarray:
    """Shared SVD update: polar factor of X'X A."""
    XtX = prob.X.values.T @ prob.X.values
    return orthonormal_polar(XtX @ model.A)


def update_Gamma_binary(prob: BinaryProblem, model: FactorModel) -> np.ndarray:
    """One proximal gradient step on all columns of Gamma."""
    loss = _loss(prob)
    grad = loss.grad_Gamma(model.A, model.Gamma)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient (divergent step size?)")
    base, _ = _resolve_base_step(prob.hyper.step_gamma, loss.lip_Gamma(model.A, model.Gamma))
    return prox_step(model.Gamma, grad, base, prob.hyper.lambda_gamma, prob.hyper.prox_scaling)


def fit_binary(
    prob: BinaryProblem,
    init: FactorModel | None = None,
    seed: int | None = None,
) -> FitResult:
    """Alternating fit of the binary objective; effect on the log-odds scale."""
    extra = {"standardized": prob.X.standardized, "variance_divisor": "n-1"}
    return fit_als(
        _loss(prob), prob.hyper, kind="binary", init=init, seed=seed,
        extra_metadata=extra,
    )
