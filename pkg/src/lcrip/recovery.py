"""Basis pursuit and RIP / sparse-recovery experiments."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import metrics
from .sampler import DistributionSpec, RandomStream, sample_matrix
from .tails import clopper_pearson

__all__ = [
    "InfeasibleError",
    "NonConvergenceError",
    "BasisPursuitResult",
    "basis_pursuit",
    "basis_pursuit_full",
    "RecoveryTrial",
    "RecoveryResult",
    "recovery_experiment",
    "DeltaEnsemble",
    "delta_m_ensemble",
]

MAX_ITER = 100_000
SUCCESS_RTOL = 1e-6


class InfeasibleError(RuntimeError):
    """No vector satisfies the measurement constraint."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, best_iterate: Optional[np.ndarray] = None):
        super().__init__(message)
        self.best_iterate = best_iterate


@dataclass
class BasisPursuitResult:
    z: np.ndarray
    l1: float
    residual: float
    duality_gap: float


def _equality_bp(A: np.ndarray, b: np.ndarray) -> BasisPursuitResult:
    n, N = A.shape
    # z = u - v, u, v >= 0
    res = linprog(
        np.ones(2 * N),
        A_eq=np.hstack([A, -A]),
        b_eq=b,
        bounds=(0, None),
        method="highs-ds",
        options={
            "maxiter": MAX_ITER,
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if res.status == 2:
        raise InfeasibleError("measurements are inconsistent with the matrix")
    if res.status == 1:
        best = None if res.x is None else res.x[:N] - res.x[N:]
        raise NonConvergenceError("iteration cap reached", best)
    if res.status != 0:
        raise NonConvergenceError(f"linprog failed: {res.message}")
    z = res.x[:N] - res.x[N:]
    # polish: least squares on the support found by the simplex
    S = np.flatnonzero(np.abs(z) > 1e-12)
    if 0 < S.size <= n:
        zs, *_ = np.linalg.lstsq(A[:, S], b, rcond=None)
        if np.all(np.sign(zs) == np.sign(z[S])):
            cand = np.zeros(N)
            cand[S] = zs
            if np.linalg.norm(A @ cand - b) <= np.linalg.norm(A @ z - b):
                z = cand
    y = res.eqlin.marginals
    # b^T y is a lower bound on the optimum once ||A^T y||_inf <= 1
    scale = max(1.0, float(np.max(np.abs(A.T @ y)))) if y is not None and y.size else 1.0
    dual = float(b @ y) / scale if y is not None and y.size else -np.inf
    l1 = float(np.abs(z).sum())
    return BasisPursuitResult(z, l1, float(np.linalg.norm(A @ z - b)), l1 - dual)


def _noisy_bp(A: np.ndarray, b: np.ndarray, eps: float) -> BasisPursuitResult:
    import cvxpy as cp

    z = cp.Variable(A.shape[1])
    prob = cp.Problem(cp.Minimize(cp.norm1(z)), [cp.norm2(A @ z - b) <= eps])
    prob.solve(solver=cp.CLARABEL, max_iter=MAX_ITER, tol_gap_abs=1e-10, tol_gap_rel=1e-10,
               tol_feas=1e-10)
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        raise InfeasibleError("no point within the residual tolerance")
    if prob.status != "optimal":
        raise NonConvergenceError(f"solver status {prob.status}", z.value)
    zv = np.asarray(z.value)
    l1 = float(np.abs(zv).sum())
    return BasisPursuitResult(zv, l1, float(np.linalg.norm(A @ zv - b)), abs(l1 - prob.value))


def basis_pursuit_full(A, b, tol: float = 0.0) -> BasisPursuitResult:
    """min ||z||_1 subject to ||Az - b||_2 <= tol * max(1, ||b||_2)."""
    A = metrics.as_matrix(A)
    b = np.asarray(b, dtype=float).ravel()
    n, N = A.shape
    if b.shape != (n,):
        raise ValueError(f"b must have length {n}")
    if n > N:
        raise ValueError("basis pursuit needs n <= N")
    if tol < 0:
        raise ValueError("tol must be non-negative")
    eps = tol * max(1.0, float(np.linalg.norm(b)))
    if eps == 0.0:
        return _equality_bp(A, b)
    return _noisy_bp(A, b, eps)


def basis_pursuit(A, b, tol: float = 0.0) -> np.ndarray:
    return basis_pursuit_full(A, b, tol).z


# ---------------------------------------------------------------------------
# experiments


def _pool_map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


@dataclass
class RecoveryTrial:
    trial: int
    n: int
    N: int
    m: int
    support: list
    signs: list
    success: bool
    error_inf: float
    residual: float
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RecoveryResult:
    n: int
    N: int
    m: int
    trials: list

    @property
    def successes(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def success_rate(self) -> float:
        return self.successes / len(self.trials)

    def ci(self):
        lo, hi = clopper_pearson(self.successes, len(self.trials))
        return float(lo), float(hi)


def recovery_experiment(
    spec: DistributionSpec,
    n: int,
    N: int,
    m: int,
    trials: int,
    stream: RandomStream,
    workers: int = 1,
) -> RecoveryResult:
    """Basis pursuit on (Gamma/sqrt(n), Gamma x/sqrt(n)) for random unit m-sparse x.

    x has a uniformly random support and entries +-1/sqrt(m).
    """
    if spec.dimension != N:
        raise ValueError("spec dimension must equal N")
    if not (1 <= m <= N and 1 <= n <= N):
        raise ValueError("need 1 <= m <= N and 1 <= n <= N")

    def one(t):
        sub = stream.child(t)
        A = sample_matrix(spec, n, sub.child(0)) / math.sqrt(n)
        rng = sub.child(1).generator()
        S = np.sort(rng.choice(N, size=m, replace=False))
        signs = rng.integers(0, 2, m) * 2 - 1
        x = np.zeros(N)
        x[S] = signs / math.sqrt(m)
        b = A @ x
        try:
            z = basis_pursuit(A, b)
        except (InfeasibleError, NonConvergenceError) as exc:
            return RecoveryTrial(t, n, N, m, S.tolist(), signs.tolist(), False, float("inf"),
                                 float("inf"), f"{type(exc).__name__}: {exc}")
        err = float(np.max(np.abs(z - x)))
        ok = err <= SUCCESS_RTOL * float(np.max(np.abs(x)))
        return RecoveryTrial(t, n, N, m, S.tolist(), signs.tolist(), ok, err,
                             float(np.linalg.norm(A @ z - b)))

    return RecoveryResult(n, N, m, _pool_map(one, range(trials), workers))


@dataclass
class DeltaEnsemble:
    values: np.ndarray
    reports: list
    method: str

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    @property
    def q90(self) -> float:
        return float(np.quantile(self.values, 0.9))


def delta_m_ensemble(
    spec: DistributionSpec,
    n: int,
    m: int,
    trials: int,
    method: str = "exact",
    stream: Optional[RandomStream] = None,
    n_supports: int = 100_000,
    cap: int = metrics.DELTA_CAP,
    workers: int = 1,
) -> DeltaEnsemble:
    """Independent draws of delta_m(Gamma / sqrt(n))."""
    if stream is None:
        stream = RandomStream(0)
    N = spec.dimension
    if method == "exact" and math.comb(N, m) > cap:
        raise metrics.TooLargeError(
            f"C({N},{m}) supports exceeds cap {cap}; use method='support_sampled'"
        )
    if method not in ("exact", "support_sampled"):
        raise ValueError(f"unknown method {method!r}")

    def one(t):
        sub = stream.child(t)
        A = sample_matrix(spec, n, sub.child(0)) / math.sqrt(n)
        if method == "exact":
            return metrics.delta_m_exact(A, m, cap=cap)
        return metrics.delta_m_sampled(A, m, n_supports, sub.child(1))

    reports = _pool_map(one, range(trials), workers)
    return DeltaEnsemble(np.array([r.value for r in reports]), reports, method)
