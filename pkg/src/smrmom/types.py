"""Shared data model for treatment-effect estimation on multiple outcomes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

OUTCOME_KINDS = ("continuous", "binary", "multiclass", "count")


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DesignMatrix:
    """n x (m+1) covariate matrix whose first column is the intercept.

    ``constant_columns`` lists zero-variance raw columns that were left
    untouched by standardization (0-based raw column indices).
    """

    values: np.ndarray
    standardized: bool = False
    constant_columns: tuple[int, ...] = ()

    def __post_init__(self):
        arr = _as_matrix(self.values, "design matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("design matrix contains non-finite entries")
        if arr.shape[0] < 1:
            raise ValueError("design matrix needs at least one row")
        if arr.shape[1] < 2:
            raise ValueError("design matrix needs an intercept plus at least one covariate")
        if not np.all(arr[:, 0] == 1.0):
            raise ValueError("first design column must be the intercept (all ones)")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1] - 1


@dataclass(frozen=True)
class TreatmentAssignment:
    """Observed arm labels, one of -1 (control) / +1 (test) per subject."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=float).ravel()
        if arr.size < 1:
            raise ValueError("treatment assignment is empty")
        if not np.all(np.isin(arr, (-1.0, 1.0))):
            raise ValueError("treatment labels must be exactly -1 or +1")
        object.__setattr__(self, "labels", arr)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class OutcomeMatrix:
    """n x p outcomes plus their kind (continuous, binary, multiclass, count)."""

    values: np.ndarray
    kind: str = "continuous"

    def __post_init__(self):
        arr = _as_matrix(self.values, "outcome matrix")
        if self.kind not in OUTCOME_KINDS:
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("outcome matrix contains non-finite entries")
        if self.kind == "binary":
            if not np.all(np.isin(arr, (0.0, 1.0))):
                raise ValueError("binary outcomes must be 0/1")
        elif self.kind == "multiclass":
            if not np.all(np.isin(arr, (0.0, 1.0))) or not np.allclose(arr.sum(axis=1), 1.0):
                raise ValueError("multiclass outcomes must be one-hot rows")
        elif self.kind == "count":
            if np.any(arr < 0) or not np.all(arr == np.round(arr)):
                raise ValueError("count outcomes must be nonnegative integers")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FactorModel:
    """Parameter triple: sparse covariate loading A ((m+1) x d), orthonormal
    auxiliary loading B ((m+1) x d) and latent coefficients Gamma (d x p)."""

    A: np.ndarray
    B: np.ndarray
    Gamma: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        G = _as_matrix(self.Gamma, "Gamma")
        if A.shape != B.shape:
            raise ValueError(f"A and B shapes differ: {A.shape} vs {B.shape}")
        if G.shape[0] != A.shape[1]:
            raise ValueError(f"Gamma has {G.shape[0]} rows but A has {A.shape[1]} columns")
        if A.shape[1] > A.shape[0] - 1:
            raise ValueError("component count d must not exceed the covariate count m")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Gamma", G)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def p(self) -> int:
        return self.Gamma.shape[1]


_PROX_SCALINGS = ("paper", "standard")


@dataclass(frozen=True)
class Hyperparameters:
    """Solver configuration.

    ``step_a`` / ``step_gamma`` are fixed positive learning rates or "auto",
    in which case a curvature-based step plus objective backtracking is used.
    ``prox_scaling`` selects whether the soft threshold is the raw penalty
    ("paper") or penalty times step size ("standard").  ``lambda_d`` is the
    main-effect penalty used only by the full-model baselines (defaults to
    ``lambda_gamma`` when None).
    """

    d: int
    omega: float = 0.1
    lambda_a: float = 0.0
    lambda_gamma: float = 0.0
    step_a: float | str = "auto"
    step_gamma: float | str = "auto"
    max_sweeps: int = 1000
    tol: float = 1e-6
    prox_scaling: str = "paper"
    lambda_d: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.lambda_a < 0 or self.lambda_gamma < 0:
            raise ValueError("penalty weights must be nonnegative")
        for name in ("step_a", "step_gamma"):
            step = getattr(self, name)
            if isinstance(step, str):
                if step != "auto":
                    raise ValueError(f"{name} must be a positive number or 'auto'")
            elif not step > 0:
                raise ValueError(f"{name} must be a positive number or 'auto'")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.prox_scaling not in _PROX_SCALINGS:
            raise ValueError(f"prox_scaling must be one of {_PROX_SCALINGS}")
        if self.lambda_d is not None and self.lambda_d < 0:
            raise ValueError("lambda_d must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    """Converged model, objective trace and estimated effect matrix."""

    model: FactorModel
    effect: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    hyper: Hyperparameters
    kind: str
    seed: int | None = None
    D: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


@dataclass(frozen=True)
class Problem:
    """One estimation problem: design, treatment, outcomes and hyperparameters."""

    X: DesignMatrix
    t: TreatmentAssignment
    Y: OutcomeMatrix
    hyper: Hyperparameters

    def __post_init__(self):
        if self.t.n != self.X.n:
            raise ValueError(f"treatment length {self.t.n} != subject count {self.X.n}")
        if self.Y.n != self.X.n:
            raise ValueError(f"outcome rows {self.Y.n} != subject count {self.X.n}")
        if self.hyper.d > self.X.m:
            raise ValueError("component count d must not exceed the covariate count m")

    @property
    def n(self) -> int:
        return self.X.n

    @property
    def p(self) -> int:
        return self.Y.p
