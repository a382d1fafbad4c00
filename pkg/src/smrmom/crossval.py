"""k-fold cross-validation for the two L1 penalty weights."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .binary import BinaryProblem, fit_binary
from .continuous import ContinuousProblem, fit_continuous
from .core import log1p_exp
from .losses import bind_loss, loss_kind_for_outcome
from .solver import probe_a_max, probe_gamma_max
from .types import DesignMatrix, Hyperparameters, OutcomeMatrix, Problem, TreatmentAssignment


@dataclass(frozen=True)
class CvPlan:
    """Grid and fold layout for penalty selection.

    ``lambda_gamma_grid`` of None requests a data-driven log-spaced grid
    whose maximum is the smallest penalty that zeroes Gamma on its first
    update; ``lambda_a_grid`` of None likewise builds a grid from
    ``a_fractions`` times a probed loading-gradient scale.  ``warm_start``
    reuses the previous grid cell's fit as the next cell's initializer
    (descending penalty order within each fold).  ``inner_max_sweeps`` /
    ``inner_tol`` cap the fold fits; None keeps the problem's own settings.
    """

    k: int = 5
    lambda_a_grid: tuple[float, ...] | None = (0.10, 0.15, 0.20, 0.25, 0.30)
    lambda_gamma_grid: tuple[float, ...] | None = None
    n_gamma: int = 5
    gamma_span: float = 1e-2
    a_fractions: tuple[float, ...] = (0.03, 0.06, 0.12, 0.25, 0.5)
    seed: int | None = None
    warm_start: bool = True
    inner_max_sweeps: int | None = None
    inner_tol: float | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("fold count k must be at least 2")
        for name in ("lambda_a_grid", "lambda_gamma_grid", "a_fractions"):
            grid = getattr(self, name)
            if grid is None:
                continue
            grid = tuple(float(v) for v in grid)
            if not grid:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, grid)
        if self.n_gamma < 1:
            raise ValueError("n_gamma must be positive")
        if not 0 < self.gamma_span <= 1:
            raise ValueError("gamma_span must be in (0, 1]")


@dataclass
class CvTable:
    """Cross-validation scores over the penalty grid (rows: lambda_a)."""

    lambda_a_grid: tuple[float, ...]
    lambda_gamma_grid: tuple[float, ...]
    scores: np.ndarray
    invalid_folds: np.ndarray
    max_trace_rise: float = 0.0

    def to_csv(self) -> str:
        lines = ["lambda_a,lambda_gamma,score,invalid_folds"]
        for ia, la in enumerate(self.lambda_a_grid):
            for ig, lg in enumerate(self.lambda_gamma_grid):
                lines.append(
                    f"{float(la)!r},{float(lg)!r},{float(self.scores[ia, ig])!r},"
                    f"{int(self.invalid_folds[ia, ig])}"
                )
        return "\n".join(lines) + "\n"


def kfold_split(n: int, k: int, seed=None) -> list[np.ndarray]:
    """k disjoint index arrays covering range(n), sizes differing by at most
    one, deterministic under the seed."""
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    if k < 1:
        raise ValueError("fold count must be positive")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def _subproblem(prob: Problem, rows: np.ndarray) -> Problem:
    X = DesignMatrix(
        prob.X.values[rows],
        standardized=prob.X.standardized,
        constant_columns=prob.X.constant_columns,
    )
    t = TreatmentAssignment(prob.t.labels[rows])
    Y = OutcomeMatrix(prob.Y.values[rows], prob.Y.kind)
    cls = type(prob)
    return cls(X=X, t=t, Y=Y, hyper=prob.hyper)


def fold_problems(prob: Problem, plan: CvPlan) -> list[tuple[Problem, np.ndarray]]:
    """(training subproblem, held-out row indices) for every fold.

    Training problems are built from disjoint row views, so held-out rows
    can never influence a fold's fit.
    """
    folds = kfold_split(prob.n, plan.k, plan.seed)
    all_rows = np.arange(prob.n)
    out = []
    for heldout in folds:
        train = np.setdiff1d(all_rows, heldout)
        out.append((_subproblem(prob, train), heldout))
    return out


def _fitter(prob: Problem):
    if prob.Y.kind == "continuous":
        return fit_continuous
    if prob.Y.kind == "binary":
        return fit_binary
    raise ValueError(f"cross-validation supports continuous/binary outcomes, got {prob.Y.kind!r}")


def _heldout_score(prob: Problem, rows: np.ndarray, model) -> float:
    X = prob.X.values[rows]
    t = prob.t.labels[rows]
    Y = prob.Y.values[rows]
    effect = X @ model.A @ model.Gamma
    if prob.Y.kind == "continuous":
        R = 2.0 * t[:, None] * Y - effect
        return float(np.sum(R * R)) / len(rows)
    z = 0.5 * t[:, None] * effect
    return float(np.sum(log1p_exp(z) - Y * z)) / len(rows)


def _capped_hyper(hyper: Hyperparameters, plan: CvPlan, **overrides) -> Hyperparameters:
    if plan.inner_max_sweeps is not None:
        overrides.setdefault("max_sweeps", plan.inner_max_sweeps)
    if plan.inner_tol is not None:
        overrides.setdefault("tol", plan.inner_tol)
    return replace(hyper, **overrides)


def _trace_rise(result) -> float:
    diffs = np.diff(result.objective_trace)
    return float(diffs.max()) if diffs.size else 0.0


def cv_score(prob: Problem, hyper: Hyperparameters, plan: CvPlan) -> float:
    """Mean held-out loss over folds for one hyperparameter setting.

    Continuous problems score the modified outcome against the fitted
    effect matrix; binary problems score the held-out negative
    log-likelihood.  Both are normalized per held-out row.
    """
    fit = _fitter(prob)
    capped = _capped_hyper(hyper, plan)
    scores = []
    invalid = 0
    for train_prob, heldout in fold_problems(prob, plan):
        train_prob = replace(train_prob, hyper=capped)
        try:
            res = fit(train_prob)
        except Exception as exc:  # fold marked invalid, not fatal
            invalid += 1
            warnings.warn(f"fold fit failed: {exc}")
            continue
        scores.append(_heldout_score(prob, heldout, res.model))
    if not scores:
        raise ValueError("every cross-validation fold failed")
    return float(np.mean(scores))


def lambda_gamma_grid(prob: Problem, plan: CvPlan) -> tuple[float, ...]:
    """Log-spaced latent-coefficient penalty grid with a data-driven top."""
    if plan.lambda_gamma_grid is not None:
        return plan.lambda_gamma_grid
    probe_hyper = replace(prob.hyper, lambda_a=0.0, lambda_gamma=0.0)
    loss = bind_loss(loss_kind_for_outcome(prob.Y.kind), prob)
    lam_max = probe_gamma_max(loss, probe_hyper, prob.Y.kind)
    if lam_max <= 0:
        lam_max = 1.0
    grid = lam_max * np.logspace(np.log10(plan.gamma_span), 0.0, plan.n_gamma)
    return tuple(float(v) for v in grid)


def lambda_a_grid(prob: Problem, plan: CvPlan) -> tuple[float, ...]:
    """Loading penalty grid; data-driven fractions when the plan has none."""
    if plan.lambda_a_grid is not None:
        return plan.lambda_a_grid
    loss = bind_loss(loss_kind_for_outcome(prob.Y.kind), prob)
    scale = probe_a_max(loss, prob.hyper, prob.Y.kind)
    if scale <= 0:
        scale = 1.0
    return tuple(float(f * scale) for f in plan.a_fractions)


def select_lambdas(prob: Problem, plan: CvPlan) -> tuple[float, float, CvTable]:
    """Grid search over (lambda_a, lambda_gamma); exact ties break toward the
    larger (sparser) penalties, lambda_a first."""
    fit = _fitter(prob)
    grid_a = lambda_a_grid(prob, plan)
    grid_g = lambda_gamma_grid(prob, plan)
    na, ng = len(grid_a), len(grid_g)
    totals = np.zeros((na, ng))
    valid = np.zeros((na, ng), dtype=int)
    max_rise = 0.0

    for train_prob, heldout in fold_problems(prob, plan):
        for ia, lam_a in enumerate(grid_a):
            init = None
            # descending penalty: the sparser solution seeds the denser one
            for ig in range(ng - 1, -1, -1):
                hyper_cell = _capped_hyper(
                    prob.hyper, plan, lambda_a=lam_a, lambda_gamma=grid_g[ig]
                )
                cell_prob = replace(train_prob, hyper=hyper_cell)
                try:
                    res = fit(cell_prob, init=init)
                except Exception as exc:
                    warnings.warn(f"fold fit failed: {exc}")
                    init = None
                    continue
                max_rise = max(max_rise, _trace_rise(res))
                if plan.warm_start:
                    init = res.model
                totals[ia, ig] += _heldout_score(prob, heldout, res.model)
                valid[ia, ig] += 1

    if not np.any(valid):
        raise ValueError("every cross-validation cell failed")
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(valid > 0, totals / valid, np.inf)
    invalid_folds = plan.k - valid

    best = np.min(scores)
    best_a, best_g = max(
        (ia, ig) for ia in range(na) for ig in range(ng) if scores[ia, ig] == best
    )
    table = CvTable(
        lambda_a_grid=grid_a,
        lambda_gamma_grid=grid_g,
        scores=scores,
        invalid_folds=invalid_folds,
        max_trace_rise=max_rise,
    )
    return grid_a[best_a], grid_g[best_g], table
