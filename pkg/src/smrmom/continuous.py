"""Joint sparse estimation for multiple continuous outcomes.

Minimizes

    || Y - (1/2) diag(t) X A Gamma ||_F^2 + omega || X - X A B' ||_F^2
        + lambda_a * sum_k ||a_k||_1 + lambda_gamma * sum_l ||gamma_l||_1
        subject to B'B = I

by alternating proximal gradient steps on A and Gamma with an SVD step
on B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import GaussianLoss, bind_loss
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
class ContinuousProblem(Problem):
    def __post_init__(self):
        super().__post_init__()
        if self.Y.kind != "continuous":
            raise ValueError(f"continuous problem requires continuous outcomes, got {self.Y.kind!r}")


def _loss(prob: Problem) -> GaussianLoss:
    return bind_loss("gaussian", prob)


def objective_continuous(prob: ContinuousProblem, model: FactorModel) -> float:
    """Squared loss plus reconstruction term plus L1 penalties."""
    return composite_objective(_loss(prob), prob.hyper, model.A, model.B, model.Gamma)


def grad_A_continuous(prob: ContinuousProblem, model: FactorModel) -> np.ndarray:
    """Gradient of the smooth objective part in A (B taken orthonormal):

    -X' diag(t) Y Gamma' + (1/2) X'X A Gamma Gamma'
        + omega (-2 X'X B + 2 X'X A)
    """
    loss = _loss(prob)
    return loss.grad_A(model.A, model.Gamma) + pca_grad_A(
        loss.XtX, model.A, model.B, prob.hyper.omega
    )


def grad_Gamma_continuous(prob: ContinuousProblem, model: FactorModel) -> np.ndarray:
    """Gradient of the squared loss in Gamma:
    -A'X' diag(t) Y + (1/2) A'X'X A Gamma."""
    return _loss(prob).grad_Gamma(model.A, model.Gamma)


def _prox_update(prob, model, grad, step_cfg, lip, lam) -> np.ndarray:
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient (divergent step size?)")
    base, _ = _resolve_base_step(step_cfg, lip)
    target = model.A if grad.shape == model.A.shape else model.Gamma
    return prox_step(target, grad, base, lam, prob.hyper.prox_scaling)


def update_A(prob: ContinuousProblem, model: FactorModel) -> np.ndarray:
    """One proximal gradient step on A (base step size, no backtracking)."""
    loss = _loss(prob)
    grad = grad_A_continuous(prob, model)
    lip = loss.lip_A(model.A, model.Gamma) + 2.0 * prob.hyper.omega * loss.norm_XtX
    return _prox_update(prob, model, grad, prob.hyper.step_a, lip, prob.hyper.lambda_a)


def update_B(prob: Problem, model: FactorModel) -> np.ndarray:
    """Orthonormal B maximizing tr(B' X'X A): the polar factor of X'X A."""
    XtX = prob.X.values.T @ prob.X.values
    return orthonormal_polar(XtX @ model.A)


def update_Gamma(prob: ContinuousProblem, model: FactorModel) -> np.ndarray:
    """One proximal gradient step on Gamma (base step size, no backtracking)."""
    loss = _loss(prob)
    grad = grad_Gamma_continuous(prob, model)
    lip = loss.lip_Gamma(model.A, model.Gamma)
    return _prox_update(prob, model, grad, prob.hyper.step_gamma, lip, prob.hyper.lambda_gamma)


def fit_continuous(
    prob: ContinuousProblem,
    init: FactorModel | None = None,
    seed: int | None = None,
) -> FitResult:
    """Alternating fit until the relative objective change drops below tol."""
    extra = {"standardized": prob.X.standardized, "variance_divisor": "n-1"}
    return fit_als(
        _loss(prob), prob.hyper, kind="continuous", init=init, seed=seed,
        extra_metadata=extra,
    )
