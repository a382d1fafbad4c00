import numpy as np
import pytest

from smrmom.binary import BinaryProblem
from smrmom.continuous import ContinuousProblem
from smrmom.types import (
    DesignMatrix,
    FactorModel,
    Hyperparameters,
    OutcomeMatrix,
    Problem,
    TreatmentAssignment,
)

_PROBLEM_CLS = {"continuous": ContinuousProblem, "binary": BinaryProblem}


def random_orthonormal(q, d, rng):
    M = rng.standard_normal((q, d))
    Q, _ = np.linalg.qr(M)
    return Q[:, :d]


def make_problem(kind="continuous", n=30, m=5, p=3, d=2, seed=0, **hyper_kw):
    rng = np.random.default_rng(seed)
    X = DesignMatrix(np.hstack([np.ones((n, 1)), rng.standard_normal((n, m))]))
    t = TreatmentAssignment(rng.integers(0, 2, n) * 2.0 - 1.0)
    if kind == "continuous":
        Y = OutcomeMatrix(rng.standard_normal((n, p)), "continuous")
    elif kind == "binary":
        Y = OutcomeMatrix((rng.standard_normal((n, p)) > 0).astype(float), "binary")
    elif kind == "multiclass":
        labels = rng.integers(0, p, n)
        Y = OutcomeMatrix(np.eye(p)[labels], "multiclass")
    elif kind == "count":
        Y = OutcomeMatrix(rng.poisson(2.0, (n, p)).astype(float), "count")
    else:
        raise ValueError(kind)
    hyper_kw.setdefault("omega", 0.1)
    hyper = Hyperparameters(d=d, **hyper_kw)
    cls = _PROBLEM_CLS.get(kind, Problem)
    return cls(X=X, t=t, Y=Y, hyper=hyper)


def random_model(prob, seed=0, gamma_scale=1.0):
    """Random model with orthonormal A and B (B orthonormality is an
    invariant the gradient formulas rely on)."""
    rng = np.random.default_rng(seed)
    q = prob.X.values.shape[1]
    d = prob.hyper.d
    A = random_orthonormal(q, d, rng)
    B = random_orthonormal(q, d, rng)
    Gamma = gamma_scale * rng.standard_normal((d, prob.Y.p))
    return FactorModel(A=A, B=B, Gamma=Gamma)


def fd_gradient(fun, M, eps=1e-6):
    """Central finite differences of a scalar function of a matrix."""
    M = np.asarray(M, dtype=float)
    out = np.zeros_like(M)
    it = np.nditer(M, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        Mp = M.copy()
        Mp[idx] += eps
        Mm = M.copy()
        Mm[idx] -= eps
        out[idx] = (fun(Mp) - fun(Mm)) / (2.0 * eps)
        it.iternext()
    return out


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / denom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
