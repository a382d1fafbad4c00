"""Modified-outcome transform, prediction formulas and scalar primitives."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .types import DesignMatrix, FactorModel, OutcomeMatrix, TreatmentAssignment


def soft_threshold(v, lam):
    """Soft-thresholding operator sign(v) * max(|v| - lam, 0).

    Works elementwise on arrays; values with |v| <= lam map to exactly 0.
    """
    if np.any(np.asarray(lam) < 0):
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def log1p_exp(z):
    """Overflow-safe log(1 + exp(z)) = max(z, 0) + log1p(exp(-|z|))."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def build_design(raw, standardize: bool = False) -> DesignMatrix:
    """Prepend an intercept column, optionally standardizing the covariates.

    Standardization centers each raw column and scales it to unit sample
    variance (divisor n-1).  Zero-variance columns are left as-is and
    reported through ``DesignMatrix.constant_columns``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError(f"raw covariates must be a 2-d array, got shape {raw.shape}")
    n, m = raw.shape
    if n < 1:
        raise ValueError("covariate matrix has zero rows")
    if not np.all(np.isfinite(raw)):
        raise ValueError("covariate matrix contains non-finite entries")
    constant: tuple[int, ...] = ()
    if standardize:
        if n < 2:
            raise ValueError("cannot standardize with fewer than two rows (zero variance)")
        mean = raw.mean(axis=0)
        sd = raw.std(axis=0, ddof=1)
        zero = sd == 0.0
        constant = tuple(int(j) for j in np.flatnonzero(zero))
        safe_sd = np.where(zero, 1.0, sd)
        raw = np.where(zero, raw, (raw - mean) / safe_sd)
    values = np.hstack([np.ones((n, 1)), raw])
    return DesignMatrix(values, standardized=standardize, constant_columns=constant)


def modified_outcome(Y: OutcomeMatrix, t: TreatmentAssignment) -> np.ndarray:
    """Per-subject doubled, arm-signed outcomes: row i is 2 * t_i * Y_i."""
    if Y.kind != "continuous":
        raise ValueError("modified outcomes are defined for continuous outcomes")
    if Y.n != t.n:
        raise ValueError(f"outcome rows {Y.n} != treatment length {t.n}")
    return 2.0 * t.labels[:, None] * Y.values


def treatment_effect(X: DesignMatrix, model: FactorModel) -> np.ndarray:
    """Estimated per-subject effect matrix X A Gamma."""
    if model.A.shape[0] != X.values.shape[1]:
        raise ValueError(
            f"loading rows {model.A.shape[0]} != design columns {X.values.shape[1]}"
        )
    return X.values @ model.A @ model.Gamma


def predict_continuous(
    X: DesignMatrix, t: TreatmentAssignment, model: FactorModel
) -> np.ndarray:
    """Model-implied continuous outcomes (1/2) diag(t) X A Gamma."""
    if t.n != X.n:
        raise ValueError(f"treatment length {t.n} != subject count {X.n}")
    return 0.5 * t.labels[:, None] * treatment_effect(X, model)


def predict_binary_prob(
    X: DesignMatrix, t: TreatmentAssignment, model: FactorModel
) -> np.ndarray:
    """Per-cell success probabilities of the latent logistic model.

    Entry (i, j) is sigmoid(t_i * (X A Gamma)_ij / 2), clipped away from
    exact 0/1 so downstream log-likelihoods stay finite.
    """
    if t.n != X.n:
        raise ValueError(f"treatment length {t.n} != subject count {X.n}")
    z = 0.5 * t.labels[:, None] * treatment_effect(X, model)
    prob = expit(z)
    tiny = np.finfo(float).tiny
    return np.clip(prob, tiny, 1.0 - np.finfo(float).epsneg)
