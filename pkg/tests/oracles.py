"""Independent reference solvers used only to cross-check the fits."""

import numpy as np
from scipy.optimize import minimize

from smrmom.continuous import objective_continuous
from smrmom.losses import bind_loss
from smrmom.solver import orthonormal_polar
from smrmom.types import FactorModel


def random_orthonormal(q, d, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((q, d)))
    return Q[:, :d]


def exact_als_oracle(prob, init_A, max_iter=500, tol=1e-12):
    """Alternating exact least-squares minimizer of the unpenalized
    continuous objective: closed-form block solves plus the polar B step."""
    X, t, Y = prob.X.values, prob.t.labels, prob.Y.values
    h = prob.hyper
    XtX = X.T @ X
    XtTY = X.T @ (t[:, None] * Y)
    A = init_A.copy()
    B = orthonormal_polar(XtX @ A)
    G = np.zeros((A.shape[1], Y.shape[1]))
    prev = objective_continuous(prob, FactorModel(A=A, B=B, Gamma=G))
    cur = prev
    for _ in range(max_iter):
        rhs = XtTY @ G.T + 2.0 * h.omega * XtX @ B
        M = 0.5 * (G @ G.T) + 2.0 * h.omega * np.eye(A.shape[1])
        A = np.linalg.solve(XtX, rhs) @ np.linalg.inv(M)
        B = orthonormal_polar(XtX @ A)
        K = A.T @ XtX @ A
        G = 2.0 * np.linalg.solve(K, A.T @ XtTY)
        cur = objective_continuous(prob, FactorModel(A=A, B=B, Gamma=G))
        if abs(prev - cur) < tol * max(1.0, abs(prev)):
            break
        prev = cur
    return cur, FactorModel(A=A, B=B, Gamma=G)


def restart_oracle(prob, restarts=50, seed=0):
    rng = np.random.default_rng(seed)
    q, d = prob.X.values.shape[1], prob.hyper.d
    best = np.inf
    for _ in range(restarts):
        A0 = random_orthonormal(q, d, rng)
        try:
            val, _ = exact_als_oracle(prob, A0)
        except np.linalg.LinAlgError:
            continue
        best = min(best, val)
    return best


def binary_restart_oracle(prob, restarts=50, seed=0, alternations=100):
    """Alternating exact minimization with BFGS block solves (lambda = 0)."""
    X = prob.X.values
    h = prob.hyper
    q, d, p = X.shape[1], h.d, prob.Y.values.shape[1]
    XtX = X.T @ X
    loss = bind_loss("bernoulli", prob)

    def objective(A, B, G):
        recon = X - X @ A @ B.T
        return loss.value(A, G) + h.omega * np.sum(recon**2)

    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(restarts):
        A = random_orthonormal(q, d, rng)
        B = orthonormal_polar(XtX @ A)
        G = np.zeros((d, p))
        prev = np.inf
        cur = np.inf
        for _ in range(alternations):
            res = minimize(
                lambda v: objective(v.reshape(q, d), B, G),
                A.ravel(), method="BFGS", options={"gtol": 1e-9, "maxiter": 300},
            )
            A = res.x.reshape(q, d)
            B = orthonormal_polar(XtX @ A)
            res = minimize(
                lambda v: objective(A, B, v.reshape(d, p)),
                G.ravel(), method="BFGS", options={"gtol": 1e-9, "maxiter": 300},
            )
            G = res.x.reshape(d, p)
            cur = objective(A, B, G)
            if abs(prev - cur) < 1e-10 * max(1.0, abs(cur)):
                break
            prev = cur
        best = min(best, cur)
    return best
