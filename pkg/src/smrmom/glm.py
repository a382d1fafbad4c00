"""Generalized loss plug-in layer: one alternating skeleton, many outcome
families.

The minimization is

    L_reg(A, Gamma) + omega * L_DR(B) + P1(A) + P2(Gamma)

where L_reg is a pluggable negative log-likelihood, L_DR the PCA
reconstruction ||X - X A B'||_F^2 (the only reduction built here) and
P1/P2 are L1 penalties.  The gaussian and bernoulli families reduce
exactly to the specialized continuous/binary fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LOSS_KINDS, bind_loss, loss_kind_for_outcome
from .solver import fit_als
from .types import FactorModel, FitResult, Problem


@dataclass(frozen=True)
class RegressionLoss:
    """Named outcome family selecting the regression term of the objective."""

    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")


GAUSSIAN = RegressionLoss("gaussian")
BERNOULLI = RegressionLoss("bernoulli")
MULTINOMIAL = RegressionLoss("multinomial")
POISSON = RegressionLoss("poisson")


@dataclass(frozen=True)
class DimensionReductionLoss:
    """PCA reconstruction ||X - X A B'||_F^2; the only reduction instantiated."""

    kind: str = "pca"

    def value(self, X: np.ndarray, A: np.ndarray, B: np.ndarray) -> float:
        R = X - (X @ A) @ B.T
        return float(np.sum(R * R))


@dataclass(frozen=True)
class PenaltySpec:
    """L1 penalty with one shared weight per parameter block."""

    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("penalty weight must be nonnegative")

    def value(self, M: np.ndarray) -> float:
        return self.weight * float(np.abs(M).sum())


def loss_multiclass(prob: Problem, model: FactorModel) -> float:
    """Negative multinomial log-likelihood with stable log-sum-exp.

    Outcome rows must be one-hot; the zero model scores n * log(p).
    """
    if prob.Y.kind != "multiclass":
        raise ValueError("loss_multiclass requires one-hot multiclass outcomes")
    return bind_loss("multinomial", prob).value(model.A, model.Gamma)


def grad_multiclass(prob: Problem, model: FactorModel) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the multinomial loss in (A, Gamma)."""
    loss = bind_loss("multinomial", prob)
    return loss.grad_A(model.A, model.Gamma), loss.grad_Gamma(model.A, model.Gamma)


def loss_poisson(prob: Problem, model: FactorModel) -> float:
    """Negative Poisson log-likelihood including the log-factorial term."""
    if prob.Y.kind != "count":
        raise ValueError("loss_poisson requires nonnegative integer counts")
    return bind_loss("poisson", prob).value(model.A, model.Gamma)


def grad_poisson(prob: Problem, model: FactorModel) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the Poisson loss in (A, Gamma)."""
    loss = bind_loss("poisson", prob)
    return loss.grad_A(model.A, model.Gamma), loss.grad_Gamma(model.A, model.Gamma)


def fit_gsmr(
    prob: Problem,
    loss: RegressionLoss | str,
    init: FactorModel | None = None,
    seed: int | None = None,
) -> FitResult:
    """Alternating fit with the requested outcome family.

    The loss kind must match the outcome kind; gaussian/bernoulli runs are
    identical to ``fit_continuous`` / ``fit_binary``.
    """
    kind = loss.kind if isinstance(loss, RegressionLoss) else str(loss)
    expected = loss_kind_for_outcome(prob.Y.kind)
    if kind != expected:
        raise ValueError(
            f"loss kind {kind!r} does not match outcome kind {prob.Y.kind!r}"
        )
    extra = {"standardized": prob.X.standardized, "variance_divisor": "n-1"}
    return fit_als(
        bind_loss(kind, prob), prob.hyper, kind=prob.Y.kind, init=init, seed=seed,
        extra_metadata=extra,
    )
