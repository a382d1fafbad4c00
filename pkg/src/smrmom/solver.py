"""Alternating proximal-gradient engine shared by every iterative estimator.

One sweep updates, in order: the covariate loading A by a proximal gradient
step, the auxiliary orthonormal loading B by an SVD (polar) step, optionally
the main-effect block D, and the latent coefficients Gamma by a proximal
gradient step.  "auto" steps combine a curvature-based base step with
halving until the composite objective does not increase, which keeps every
recorded trace monotone; fixed steps are applied as given.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import replace

import numpy as np

from .core import soft_threshold
from .types import FactorModel, FitResult, Hyperparameters

# absolute acceptance slack; three prox blocks plus the B step stay well
# inside the 1e-10 per-sweep monotonicity budget
_SLACK = 1e-11
_MAX_HALVINGS = 30


class ConvergenceWarning(UserWarning):
    """Raised as a warning when an iterative fit hits its sweep limit."""


def _check_finite(grad: np.ndarray, block: str) -> None:
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError(
            f"non-finite gradient in {block} update (divergent step size?)"
        )


def _complete_basis(Q: np.ndarray, k: int) -> np.ndarray:
    """k orthonormal columns completing Q, built from standard basis vectors
    taken in index order (deterministic)."""
    q = Q.shape[0]
    cols: list[np.ndarray] = []
    for j in range(q):
        if len(cols) == k:
            break
        v = np.zeros(q)
        v[j] = 1.0
        v -= Q @ (Q.T @ v)
        for c in cols:
            v -= c * (c @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            cols.append(v / nrm)
    if len(cols) < k:
        raise ValueError("cannot complete an orthonormal basis")
    return np.column_stack(cols)


def orthonormal_polar(M: np.ndarray) -> np.ndarray:
    """Orthonormal polar factor U V' of the thin SVD M = U Psi V'.

    For full column rank this is the unique nearest column-orthonormal
    matrix; rank-deficient inputs are completed deterministically with
    standard-basis directions so results stay reproducible.
    """
    q, d = M.shape
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    tol = max(q, d) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.sum(s > tol))
    if r == d:
        return U @ Vt
    U_r = U[:, :r]
    V_r = Vt[:r].T
    U_c = _complete_basis(U_r, d - r)
    V_c = _complete_basis(V_r, d - r)
    return U_r @ V_r.T + U_c @ V_c.T


def prox_step(P: np.ndarray, grad: np.ndarray, step: float, lam: float, scaling: str):
    """Gradient step followed by soft thresholding.

    Under "paper" scaling the threshold is the raw penalty weight; under
    "standard" scaling it is step * penalty (the exact L1 proximal map).
    """
    P_dag = P - step * grad
    thr = lam if scaling == "paper" else step * lam
    return soft_threshold(P_dag, thr)


def pca_grad_A(XtX: np.ndarray, A: np.ndarray, B: np.ndarray, omega: float) -> np.ndarray:
    """Gradient of omega * ||X - X A B'||_F^2 in A, for orthonormal B."""
    return omega * (-2.0 * (XtX @ B) + 2.0 * (XtX @ A))


def _penalty_d(D, lambda_d) -> float:
    if D is None or lambda_d is None:
        return 0.0
    l1_d = float(np.abs(D).sum())
    if l1_d == 0.0:  # keep inf * 0 == 0 so a pinned D contributes nothing
        return 0.0
    return lambda_d * l1_d


def composite_objective(loss, hyper: Hyperparameters, A, B, Gamma, D=None, lambda_d=None) -> float:
    """Regression loss + reconstruction term + L1 penalties."""
    XA = loss.X @ A
    XD = None if D is None else loss.X @ D
    reg = loss.value_scores(XA, Gamma, XD)
    R = loss.X - XA @ B.T
    pca = hyper.omega * float(np.sum(R * R))
    pen_a = hyper.lambda_a * float(np.abs(A).sum())
    pen_g = hyper.lambda_gamma * float(np.abs(Gamma).sum()) if Gamma.size else 0.0
    return reg + pca + pen_a + pen_g + _penalty_d(D, lambda_d)


def default_init(X: np.ndarray, d: int, p: int) -> FactorModel:
    """Initial model: A from the top-d right singular vectors of X with the
    largest-magnitude entry of each column made positive, B = A, Gamma = 0."""
    _, _, Vt = np.linalg.svd(X, full_matrices=False)
    r = min(d, Vt.shape[0])
    A = Vt[:r].T.copy()
    if r < d:
        A = np.hstack([A, _complete_basis(A, d - r)])
    for k in range(d):
        j = int(np.argmax(np.abs(A[:, k])))
        if A[j, k] < 0:
            A[:, k] = -A[:, k]
    return FactorModel(A=A, B=A.copy(), Gamma=np.zeros((d, p)))


def _resolve_base_step(step_cfg, lip: float) -> tuple[float, bool]:
    """Returns (base step, backtracking enabled)."""
    if isinstance(step_cfg, str):  # "auto"
        base = 1.0 / lip if lip > 0 else 1.0
        return base, True
    return float(step_cfg), False


def fit_als(
    loss,
    hyper: Hyperparameters,
    *,
    kind: str,
    init: FactorModel | None = None,
    seed: int | None = None,
    with_d: bool = False,
    lambda_d: float | None = None,
    extra_metadata: dict | None = None,
) -> FitResult:
    """Run the alternating solver on a bound loss and return a FitResult."""
    X = loss.X
    q = X.shape[1]
    p = loss.Y.shape[1]
    d = hyper.d

    if init is None:
        start = default_init(X, d, p)
        init_label = "svd"
    else:
        start = init
        init_label = "custom"
    A = np.array(start.A, dtype=float)
    B = np.array(start.B, dtype=float)
    G = np.array(start.Gamma, dtype=float)
    D = np.zeros((q, p)) if with_d else None
    lam_d = None
    if with_d:
        lam_d = lambda_d
        if lam_d is None:
            lam_d = hyper.lambda_d if hyper.lambda_d is not None else hyper.lambda_gamma

    X = loss.X
    omega = hyper.omega
    scaling = hyper.prox_scaling

    def pca_value(XA_, B_):
        R = X - XA_ @ B_.T
        return omega * float(np.sum(R * R))

    def pen(M, lam):
        return lam * float(np.abs(M).sum()) if M.size else 0.0

    # cached objective parts; their fixed-order sum is the recorded objective
    XA = X @ A
    XD = None if D is None else X @ D
    reg = loss.value_scores(XA, G, XD)
    pca = pca_value(XA, B)
    pen_a = pen(A, hyper.lambda_a)
    pen_g = pen(G, hyper.lambda_gamma)
    pen_d = _penalty_d(D, lam_d)

    def total():
        return reg + pca + pen_a + pen_g + pen_d

    obj = total()
    trace = [obj]
    converged = False

    def shrink(P, grad, step, lam):
        P_dag = P - step * grad
        thr = lam if scaling == "paper" else step * lam
        return np.sign(P_dag) * np.maximum(np.abs(P_dag) - thr, 0.0)

    for _ in range(hyper.max_sweeps):
        # A step: regression, reconstruction and its own penalty all move
        gA = loss.grad_A(A, G, D) + pca_grad_A(loss.XtX, A, B, omega)
        _check_finite(gA, "A")
        lipA = loss.lip_A(A, G, D) + 2.0 * omega * loss.norm_XtX
        base, backtrack = _resolve_base_step(hyper.step_a, lipA)
        step = base
        for attempt in range(_MAX_HALVINGS if backtrack else 1):
            A_c = shrink(A, gA, step, hyper.lambda_a)
            XA_c = X @ A_c
            reg_c = loss.value_scores(XA_c, G, XD)
            pca_c = pca_value(XA_c, B)
            pen_c = pen(A_c, hyper.lambda_a)
            obj_c = reg_c + pca_c + pen_c + pen_g + pen_d
            if not backtrack or obj_c <= obj + _SLACK:
                A, XA, reg, pca, pen_a, obj = A_c, XA_c, reg_c, pca_c, pen_c, obj_c
                break
            step *= 0.5

        # B step: exact minimizer of the reconstruction term
        B_c = orthonormal_polar(loss.XtX @ A)
        pca_c = pca_value(XA, B_c)
        obj_c = reg + pca_c + pen_a + pen_g + pen_d
        if obj_c <= obj + _SLACK:
            B, pca, obj = B_c, pca_c, obj_c

        # D step (full-model baselines only)
        if with_d:
            gD = loss.grad_D(A, G, D)
            _check_finite(gD, "D")
            base, backtrack = _resolve_base_step("auto", loss.lip_D(A, G, D))
            step = base
            for attempt in range(_MAX_HALVINGS):
                D_c = shrink(D, gD, step, lam_d)
                XD_c = X @ D_c
                reg_c = loss.value_scores(XA, G, XD_c)
                pen_c = _penalty_d(D_c, lam_d)
                obj_c = reg_c + pca + pen_a + pen_g + pen_c
                if obj_c <= obj + _SLACK:
                    D, XD, reg, pen_d, obj = D_c, XD_c, reg_c, pen_c, obj_c
                    break
                step *= 0.5

        # Gamma step: regression and its own penalty move; scores reused
        if p > 0:
            gG = loss.grad_Gamma(A, G, D)
            _check_finite(gG, "Gamma")
            base, backtrack = _resolve_base_step(hyper.step_gamma, loss.lip_Gamma(A, G, D))
            step = base
            for attempt in range(_MAX_HALVINGS if backtrack else 1):
                G_c = shrink(G, gG, step, hyper.lambda_gamma)
                reg_c = loss.value_scores(XA, G_c, XD)
                pen_c = pen(G_c, hyper.lambda_gamma)
                obj_c = reg_c + pca + pen_a + pen_c + pen_d
                if not backtrack or obj_c <= obj + _SLACK:
                    G, reg, pen_g, obj = G_c, reg_c, pen_c, obj_c
                    break
                step *= 0.5

        trace.append(obj)
        if abs(trace[-1] - trace[-2]) < hyper.tol * max(1.0, abs(trace[-2])):
            converged = True
            break

    metadata = {
        "init": init_label,
        "prox_scaling": hyper.prox_scaling,
        "loss": loss.kind,
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    model = FactorModel(A=A, B=B, Gamma=G)
    return FitResult(
        model=model,
        effect=X @ A @ G,
        objective_trace=np.asarray(trace),
        converged=converged,
        hyper=hyper,
        kind=kind,
        seed=seed,
        D=D,
        metadata=metadata,
    )


def probe_gamma_max(loss, hyper: Hyperparameters, kind: str) -> float:
    """Smallest latent-coefficient penalty that zeroes Gamma on its first
    update from the default start, under the configured prox scaling."""
    h1 = replace(hyper, max_sweeps=1, lambda_gamma=0.0)
    res = fit_als(loss, h1, kind=kind)
    if hyper.prox_scaling == "paper":
        return float(np.max(np.abs(res.model.Gamma))) if res.model.Gamma.size else 0.0
    grad = loss.grad_Gamma(res.model.A, np.zeros_like(res.model.Gamma), None)
    return float(np.max(np.abs(grad))) if grad.size else 0.0


def probe_a_max(
    loss, hyper: Hyperparameters, kind: str, gamma_fraction: float = 0.35,
    lg_max: float | None = None,
) -> float:
    """Loading-gradient magnitude once the latent coefficients have mildly
    activated; anchors a data-driven penalty grid for A."""
    if lg_max is None:
        lg_max = probe_gamma_max(loss, replace(hyper, lambda_a=0.0), kind)
    h2 = replace(
        hyper, max_sweeps=2, lambda_a=0.0, lambda_gamma=gamma_fraction * lg_max
    )
    res = fit_als(loss, h2, kind=kind)
    grad = loss.grad_A(res.model.A, res.model.Gamma) + pca_grad_A(
        loss.XtX, res.model.A, res.model.B, hyper.omega
    )
    return float(np.max(np.abs(grad)))


def warn_if_not_converged(result: FitResult, label: str) -> None:
    if not result.converged:
        warnings.warn(f"{label} hit the sweep limit without converging", ConvergenceWarning)
