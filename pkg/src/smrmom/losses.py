"""Regression losses pluggable into the alternating solver.

Every loss is bound to one dataset and evaluates the regression term of the
joint objective together with its gradients in the loadings A, the latent
coefficients Gamma and (for the full-model baselines) the main-effect
block D.  The per-cell linear predictor is always

    z_ij = t_i * (X A Gamma)_ij / 2          (+ (X D)_ij with a D block)

so that gaussian reproduces the squared modified-outcome loss and
bernoulli the latent logistic log-likelihood.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from .core import log1p_exp
from .types import Problem

LOSS_KINDS = ("gaussian", "bernoulli", "multinomial", "poisson")


def _spectral_norm(M: np.ndarray) -> float:
    # symmetric PSD input assumed
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(M)[-1])


class BoundLoss:
    """Dataset-bound regression loss; subclasses fill in the cell loss."""

    kind = "abstract"
    supports_d = False

    def __init__(self, X: np.ndarray, t: np.ndarray, Y: np.ndarray):
        self.X = X
        self.t = t
        self.Y = Y
        self.XtX = X.T @ X
        self.norm_XtX = _spectral_norm(self.XtX)

    # residual-free hook: Y adjusted for the main-effect block
    def _y_eff(self, D):
        if D is None:
            return self.Y
        return self.Y - self.X @ D

    def value(self, A, Gamma, D=None) -> float:
        XD = None if D is None else self.X @ D
        return self.value_scores(self.X @ A, Gamma, XD)

    def value_scores(self, XA, Gamma, XD=None) -> float:
        """Loss evaluated from precomputed scores XA (and XD if present)."""
        raise NotImplementedError

    def grad_A(self, A, Gamma, D=None) -> np.ndarray:
        raise NotImplementedError

    def grad_Gamma(self, A, Gamma, D=None) -> np.ndarray:
        raise NotImplementedError

    def grad_D(self, A, Gamma, D) -> np.ndarray:
        raise NotImplementedError

    def lip_A(self, A, Gamma, D=None) -> float:
        raise NotImplementedError

    def lip_Gamma(self, A, Gamma, D=None) -> float:
        raise NotImplementedError

    def lip_D(self, A, Gamma, D) -> float:
        raise NotImplementedError


class GaussianLoss(BoundLoss):
    """Squared loss || Y - X D - (1/2) diag(t) X A Gamma ||_F^2."""

    kind = "gaussian"
    supports_d = True

    def _residual(self, A, Gamma, D):
        pred = 0.5 * self.t[:, None] * ((self.X @ A) @ Gamma)
        return self._y_eff(D) - pred

    def value_scores(self, XA, Gamma, XD=None):
        Yeff = self.Y if XD is None else self.Y - XD
        R = Yeff - 0.5 * self.t[:, None] * (XA @ Gamma)
        return float(np.sum(R * R))

    def grad_A(self, A, Gamma, D=None):
        XtTY = self.X.T @ (self.t[:, None] * self._y_eff(D))
        return -XtTY @ Gamma.T + 0.5 * self.XtX @ A @ (Gamma @ Gamma.T)

    def grad_Gamma(self, A, Gamma, D=None):
        XtTY = self.X.T @ (self.t[:, None] * self._y_eff(D))
        return -(A.T @ XtTY) + 0.5 * (A.T @ self.XtX @ A) @ Gamma

    def grad_D(self, A, Gamma, D):
        return -2.0 * self.X.T @ self._residual(A, Gamma, D)

    def lip_A(self, A, Gamma, D=None):
        return 0.5 * self.norm_XtX * _spectral_norm(Gamma @ Gamma.T)

    def lip_Gamma(self, A, Gamma, D=None):
        return 0.5 * _spectral_norm(A.T @ self.XtX @ A)

    def lip_D(self, A, Gamma, D):
        return 2.0 * self.norm_XtX


class BernoulliLoss(BoundLoss):
    """Negative Bernoulli log-likelihood of the latent logistic model."""

    kind = "bernoulli"
    supports_d = True

    def _logits(self, A, Gamma, D):
        z = 0.5 * self.t[:, None] * ((self.X @ A) @ Gamma)
        if D is not None:
            z = self.X @ D + z
        return z

    def value_scores(self, XA, Gamma, XD=None):
        z = 0.5 * self.t[:, None] * (XA @ Gamma)
        if XD is not None:
            z = XD + z
        return float(np.sum(log1p_exp(z) - self.Y * z))

    def _score(self, A, Gamma, D):
        # derivative of the cell loss in the logit: sigma(z) - y
        return expit(self._logits(A, Gamma, D)) - self.Y

    def grad_A(self, A, Gamma, D=None):
        S = self._score(A, Gamma, D)
        return 0.5 * self.X.T @ (self.t[:, None] * S) @ Gamma.T

    def grad_Gamma(self, A, Gamma, D=None):
        S = self._score(A, Gamma, D)
        return 0.5 * (self.X @ A).T @ (self.t[:, None] * S)

    def grad_D(self, A, Gamma, D):
        return self.X.T @ self._score(A, Gamma, D)

    def lip_A(self, A, Gamma, D=None):
        return self.norm_XtX * _spectral_norm(Gamma @ Gamma.T) / 16.0

    def lip_Gamma(self, A, Gamma, D=None):
        XA = self.X @ A
        return _spectral_norm(XA.T @ XA) / 16.0

    def lip_D(self, A, Gamma, D):
        return 0.25 * self.norm_XtX


class MultinomialLoss(BoundLoss):
    """Negative multinomial log-likelihood; outcomes are one-hot rows."""

    kind = "multinomial"

    def _logits(self, A, Gamma):
        return 0.5 * self.t[:, None] * ((self.X @ A) @ Gamma)

    def value_scores(self, XA, Gamma, XD=None):
        z = 0.5 * self.t[:, None] * (XA @ Gamma)
        lse = logsumexp(z, axis=1)
        return float(np.sum(lse) - np.sum(self.Y * z))

    def _score(self, A, Gamma):
        z = self._logits(A, Gamma)
        z = z - z.max(axis=1, keepdims=True)
        ez = np.exp(z)
        return ez / ez.sum(axis=1, keepdims=True) - self.Y

    def grad_A(self, A, Gamma, D=None):
        S = self._score(A, Gamma)
        return 0.5 * self.X.T @ (self.t[:, None] * S) @ Gamma.T

    def grad_Gamma(self, A, Gamma, D=None):
        S = self._score(A, Gamma)
        return 0.5 * (self.X @ A).T @ (self.t[:, None] * S)

    def lip_A(self, A, Gamma, D=None):
        return self.norm_XtX * _spectral_norm(Gamma @ Gamma.T) / 8.0

    def lip_Gamma(self, A, Gamma, D=None):
        XA = self.X @ A
        return _spectral_norm(XA.T @ XA) / 8.0


class PoissonLoss(BoundLoss):
    """Negative Poisson log-likelihood with log-gamma factorial term."""

    kind = "poisson"

    def __init__(self, X, t, Y):
        super().__init__(X, t, Y)
        self.log_fact = float(np.sum(gammaln(Y + 1.0)))

    def _logits(self, A, Gamma):
        return 0.5 * self.t[:, None] * ((self.X @ A) @ Gamma)

    def value_scores(self, XA, Gamma, XD=None):
        with np.errstate(over="ignore"):
            z = 0.5 * self.t[:, None] * (XA @ Gamma)
            return float(np.sum(np.exp(z) - self.Y * z) + self.log_fact)

    def _score(self, A, Gamma):
        with np.errstate(over="ignore"):
            return np.exp(self._logits(A, Gamma)) - self.Y

    def grad_A(self, A, Gamma, D=None):
        S = self._score(A, Gamma)
        return 0.5 * self.X.T @ (self.t[:, None] * S) @ Gamma.T

    def grad_Gamma(self, A, Gamma, D=None):
        S = self._score(A, Gamma)
        return 0.5 * (self.X @ A).T @ (self.t[:, None] * S)

    def _curvature(self, A, Gamma):
        z = self._logits(A, Gamma)
        with np.errstate(over="ignore"):
            return float(np.exp(z.max())) if z.size else 1.0

    def lip_A(self, A, Gamma, D=None):
        return 0.25 * self._curvature(A, Gamma) * self.norm_XtX * _spectral_norm(Gamma @ Gamma.T)

    def lip_Gamma(self, A, Gamma, D=None):
        XA = self.X @ A
        return 0.25 * self._curvature(A, Gamma) * _spectral_norm(XA.T @ XA)


class NullLoss(BoundLoss):
    """Zero regression term; leaves only the reconstruction objective.

    Used for the sparse-PCA stage of the tandem baselines, which minimizes
    the reconstruction and penalty terms without any outcome."""

    kind = "null"

    def __init__(self, X):
        super().__init__(X, np.ones(X.shape[0]), np.zeros((X.shape[0], 0)))

    def value_scores(self, XA, Gamma, XD=None):
        return 0.0

    def grad_A(self, A, Gamma, D=None):
        return np.zeros_like(A)

    def grad_Gamma(self, A, Gamma, D=None):
        return np.zeros_like(Gamma)

    def lip_A(self, A, Gamma, D=None):
        return 0.0

    def lip_Gamma(self, A, Gamma, D=None):
        return 0.0


_LOSS_CLASSES = {
    "gaussian": GaussianLoss,
    "bernoulli": BernoulliLoss,
    "multinomial": MultinomialLoss,
    "poisson": PoissonLoss,
}

_KIND_TO_LOSS = {
    "continuous": "gaussian",
    "binary": "bernoulli",
    "multiclass": "multinomial",
    "count": "poisson",
}


def loss_kind_for_outcome(outcome_kind: str) -> str:
    return _KIND_TO_LOSS[outcome_kind]


def bind_loss(kind: str, prob: Problem) -> BoundLoss:
    """Instantiate the named loss on a problem's data."""
    if kind not in _LOSS_CLASSES:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    expected = _KIND_TO_LOSS[prob.Y.kind]
    if kind != expected:
        raise ValueError(
            f"loss kind {kind!r} does not match outcome kind {prob.Y.kind!r}"
        )
    return _LOSS_CLASSES[kind](prob.X.values, prob.t.labels, prob.Y.values)
