"""RIP constants, sparse submatrix operator norms and related thresholds.

Conventions: index sets are returned as sorted tuples of 0-based indices;
ties are broken towards the lowest index (lexicographically smallest
witness) so that results do not depend on platform or thread count.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .sampler import RandomStream

__all__ = [
    "TooLargeError",
    "GammaCertificate",
    "DeltaReport",
    "KPrime",
    "as_matrix",
    "operator_norm",
    "top_m_energy",
    "order_statistic",
    "delta_m_exact",
    "delta_m_sampled",
    "gamma_km_exact",
    "gamma_km_heuristic",
    "gamma_k_finite",
    "self_consistent_k",
    "k_prime",
    "lambda_threshold",
    "read_matrix_csv",
    "write_matrix_csv",
]

DELTA_CAP = 10**6
GAMMA_CAP = 10**7
_CHUNK = 1 << 15


class TooLargeError(ValueError):
    """Exhaustive enumeration would exceed the configured cap."""


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def operator_norm(A) -> float:
    """Largest singular value."""
    A = as_matrix(A)
    return float(np.linalg.svd(A, compute_uv=False)[0])


def _check_rank(x: np.ndarray, r: int, name: str) -> None:
    if int(r) != r or not 1 <= r <= x.shape[-1]:
        raise ValueError(f"{name} must be an integer in [1, {x.shape[-1]}], got {r}")


def top_m_energy(x, m: int):
    """sup over coordinate projections of rank m of |P_I x|.

    Works row-wise on 2-d input.
    """
    x = np.asarray(x, dtype=float)
    _check_rank(x, m, "m")
    sq = x * x
    N = x.shape[-1]
    if m == N:
        top = sq
    else:
        top = np.partition(sq, N - m, axis=-1)[..., N - m:]
    return np.sqrt(top.sum(axis=-1))


def order_statistic(x, ell: int):
    """ell-th largest absolute coordinate (1-based). Works row-wise."""
    x = np.asarray(x, dtype=float)
    _check_rank(x, ell, "ell")
    N = x.shape[-1]
    return np.partition(np.abs(x), N - ell, axis=-1)[..., N - ell]


# ---------------------------------------------------------------------------
# support enumeration core


def _combination_chunks(N: int, m: int, chunk: int = _CHUNK):
    it = itertools.combinations(range(N), m)
    dtype = np.dtype((np.intp, (m,)))
    while True:
        block = np.fromiter(itertools.islice(it, chunk), dtype=dtype)
        if block.size == 0:
            return
        yield block.reshape(-1, m)


def _sub_grams(G: np.ndarray, supports: np.ndarray) -> np.ndarray:
    return G[supports[:, :, None], supports[:, None, :]]


def _extreme_eigs(G: np.ndarray, supports: np.ndarray):
    """(lambda_min, lambda_max) of G_JJ for every row J of ``supports``."""
    if supports.shape[1] == 1:
        d = G[supports[:, 0], supports[:, 0]]
        return d, d
    if supports.shape[1] == 2:
        i, j = supports[:, 0], supports[:, 1]
        a, b, c = G[i, i], G[i, j], G[j, j]
        mid, rad = 0.5 * (a + c), np.hypot(0.5 * (a - c), b)
        return mid - rad, mid + rad
    w = np.linalg.eigvalsh(_sub_grams(G, supports))
    return w[:, 0], w[:, -1]


def _top_eig(M: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of a stack of symmetric d x d matrices."""
    d = M.shape[-1]
    if d == 1:
        return M[..., 0, 0]
    if d == 2:
        a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
        return 0.5 * (a + c) + np.hypot(0.5 * (a - c), b)
    return np.linalg.eigvalsh(M)[..., -1]


def _map_chunks(fn, chunks, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


@dataclass(frozen=True)
class DeltaReport:
    """RIP constant with the support and extreme eigenvalue attaining it."""

    value: float
    witness_support: tuple
    witness_eigenvalue: float
    side: str
    method: str = "exact"
    lower_bound: bool = False
    supports_checked: int = 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "J": list(self.witness_support),
            "eigenvalue": self.witness_eigenvalue,
            "side": self.side,
            "method": self.method,
            "lower_bound": self.lower_bound,
            "supports_checked": self.supports_checked,
        }


def _delta_over(G: np.ndarray, chunks, workers: int):
    def best_in(supports):
        lo, hi = _extreme_eigs(G, supports)
        dev = np.maximum(hi - 1.0, 1.0 - lo)
        j = int(np.argmax(dev))
        return float(dev[j]), tuple(int(i) for i in supports[j]), float(lo[j]), float(hi[j]), len(supports)

    results = _map_chunks(best_in, chunks, workers)
    best = None
    total = 0
    for r in results:
        total += r[4]
        # strict improvement keeps the earliest (lexicographically smallest) witness
        if best is None or r[0] > best[0]:
            best = r
    dev, J, lo, hi, _ = best
    if hi - 1.0 >= 1.0 - lo:
        return dev, J, hi, "upper", total
    return dev, J, lo, "lower", total


def delta_m_exact(A, m: int, cap: int = DELTA_CAP, workers: int = 1) -> DeltaReport:
    """sup over unit m-sparse x of | |Ax|^2 - |x|^2 | by full support enumeration.

    ``A`` is the already normalised matrix (pass Gamma / sqrt(n) for a matrix
    with isotropic rows).
    """
    A = as_matrix(A)
    N = A.shape[1]
    _check_rank(A, m, "m")
    total = comb(N, m)
    if total > cap:
        raise TooLargeError(
            f"C({N},{m}) = {total} supports exceeds cap {cap}; use delta_m_sampled"
        )
    G = A.T @ A
    dev, J, eig, side, count = _delta_over(G, list(_combination_chunks(N, m)), workers)
    return DeltaReport(dev, J, eig, side, "exact", False, count)


def delta_m_sampled(
    A, m: int, n_supports: int, stream: RandomStream, workers: int = 1
) -> DeltaReport:
    """Same quantity as :func:`delta_m_exact` over random supports; a lower bound."""
    A = as_matrix(A)
    N = A.shape[1]
    _check_rank(A, m, "m")
    rng = stream.generator()
    keys = rng.random((int(n_supports), N))
    supports = np.sort(np.argpartition(keys, m - 1, axis=1)[:, :m], axis=1)
    G = A.T @ A
    chunks = [supports[i:i + _CHUNK] for i in range(0, len(supports), _CHUNK)]
    dev, J, eig, side, count = _delta_over(G, chunks, workers)
    return DeltaReport(dev, J, eig, side, "support_sampled", True, count)


# ---------------------------------------------------------------------------
# Gamma_{k,m}


@dataclass(frozen=True)
class GammaCertificate:
    """A value of Gamma_{k,m} with its witnessing rows I, support J and direction y."""

    value: float
    row_set: tuple
    support: tuple
    direction: np.ndarray
    method: str

    def recompute(self, A) -> float:
        A = as_matrix(A)
        return float(np.linalg.norm(A[list(self.row_set)] @ self.direction))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "I": list(self.row_set),
            "J": list(self.support),
            "y": [float(v) for v in self.direction],
            "method": self.method,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GammaCertificate":
        return cls(float(d["value"]), tuple(d["I"]), tuple(d["J"]), np.asarray(d["y"], dtype=float), d["method"])


def _signed(v: np.ndarray) -> np.ndarray:
    # fix the eigenvector sign: first non-negligible entry positive
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def _certificate(A, I, J, y_sub, method) -> GammaCertificate:
    N = A.shape[1]
    y = np.zeros(N)
    y[list(J)] = y_sub
    y /= np.linalg.norm(y)
    y = _signed(y)
    I = tuple(sorted(int(i) for i in I))
    J = tuple(sorted(int(j) for j in J))
    value = float(np.linalg.norm(A[list(I)] @ y))
    return GammaCertificate(value, I, J, y, method)


def _check_km(A, k, m):
    n, N = A.shape
    if int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must be an integer in [1, {n}], got {k}")
    if int(m) != m or not 1 <= m <= N:
        raise ValueError(f"m must be an integer in [1, {N}], got {m}")


def gamma_km_exact(
    A,
    k: int,
    m: int,
    cap: int = GAMMA_CAP,
    supports: Optional[Iterable[Sequence[int]]] = None,
    workers: int = 1,
) -> GammaCertificate:
    """Gamma_{k,m}: the largest operator norm of a k x m submatrix, by enumeration.

    For fixed rows I and columns J the supremum over unit y supported on J of
    sum_{i in I} <Y_i, y>^2 is the top eigenvalue of A_{I,J}^T A_{I,J}, so
    enumerating all (I, J) is exact. ``supports`` replaces the family of all
    m-subsets of columns by a caller-supplied list.
    """
    A = as_matrix(A)
    n, N = A.shape
    _check_km(A, k, m)
    if supports is None:
        n_supports = comb(N, m)
        chunks = None
    else:
        sup = np.array([sorted(s) for s in supports], dtype=np.intp)
        if sup.ndim != 2 or sup.shape[1] != m:
            raise ValueError("supports must all have size m")
        n_supports = len(sup)
        chunks = [sup[i:i + _CHUNK] for i in range(0, len(sup), _CHUNK)]
    total = comb(n, k) * n_supports
    if total > cap:
        raise TooLargeError(f"{total} (I, J) pairs exceed cap {cap}; use gamma_km_heuristic")
    if chunks is None:
        chunks = list(_combination_chunks(N, m))

    row_sets = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp).reshape(-1, k)
    per_batch = max(1, (1 << 17) // max(1, min(n_supports, _CHUNK)))
    batches = [np.arange(i, min(i + per_batch, len(row_sets))) for i in range(0, len(row_sets), per_batch)]

    # A_{I,J}^T A_{I,J} and A_{I,J} A_{I,J}^T share their top eigenvalue; use the smaller one
    row_side = k < m and n * n * min(n_supports, _CHUNK) <= 1 << 22
    Q = A[:, None, :] * A[None, :, :] if row_side else None

    def best_for_batch(idx):
        rows = row_sets[idx]
        if not row_side:
            AI = A[rows]  # (b, k, N)
            G = np.einsum("bki,bkj->bij", AI, AI)
        best = (-1.0, 0, 0)
        offset = 0
        for sup in chunks:
            if row_side:
                P = Q[:, :, sup].sum(axis=-1)  # (n, n, S)
                H = np.moveaxis(P[rows[:, :, None], rows[:, None, :]], -1, 1)  # (b, S, k, k)
            else:
                H = G[:, sup[:, :, None], sup[:, None, :]]
            hi = _top_eig(H)
            b, j = np.unravel_index(int(np.argmax(hi)), hi.shape)
            cand = (float(hi[b, j]), -int(idx[b]), -(offset + int(j)))
            if cand > best:
                best = cand
            offset += len(sup)
        return best

    top = max(_map_chunks(best_for_batch, batches, workers))
    flat = np.concatenate(chunks)
    I = tuple(row_sets[-top[1]])
    J = flat[-top[2]]
    AIJ = A[np.ix_(list(I), list(J))]
    _, vecs = np.linalg.eigh(AIJ.T @ AIJ)
    return _certificate(A, I, J, vecs[:, -1], "exact")


def gamma_k_finite(A, k: int, directions) -> GammaCertificate:
    """Gamma_k(T) for a finite set T of unit vectors (rows of ``directions``)."""
    A = as_matrix(A)
    T = np.atleast_2d(np.asarray(directions, dtype=float))
    if T.shape[1] != A.shape[1]:
        raise ValueError("directions must have A.shape[1] columns")
    if int(k) != k or not 1 <= k <= A.shape[0]:
        raise ValueError("k out of range")
    sq = (A @ T.T) ** 2
    order = np.argsort(-sq, axis=0, kind="stable")[:k]
    vals = np.take_along_axis(sq, order, axis=0).sum(axis=0)
    t = int(np.argmax(vals))
    y = T[t] / np.linalg.norm(T[t])
    I = tuple(sorted(int(i) for i in order[:, t]))
    J = tuple(int(j) for j in np.flatnonzero(y))
    return GammaCertificate(float(np.linalg.norm(A[list(I)] @ y)), I, J, y, "exact")


def _top_indices(v: np.ndarray, r: int) -> np.ndarray:
    # largest |v|, lowest index on ties
    return np.sort(np.argsort(-np.abs(v), kind="stable")[:r])


def gamma_km_heuristic(
    A,
    k: int,
    m: int,
    restarts: int = 20,
    stream: Optional[RandomStream] = None,
    max_iter: int = 200,
    init: Optional[np.ndarray] = None,
) -> GammaCertificate:
    """Lower bound on Gamma_{k,m} by alternating maximisation.

    Each iteration picks the k rows with largest |<Y_i, y>|, takes one power
    step on those rows, hard-thresholds to the m largest coordinates and then
    replaces y by the top singular direction of the selected k x m block. Starts,
    in order: ``init`` if given, coordinate vectors of the columns with the
    largest top-k energy (half the budget), the top right singular vector of A,
    then random Gaussian directions.
    """
    A = as_matrix(A)
    n, N = A.shape
    _check_km(A, k, m)
    if stream is None:
        stream = RandomStream(0)
    rng = stream.generator()

    restarts = max(int(restarts), 1)
    starts = []
    if init is not None:
        starts.append(np.asarray(init, dtype=float))
    # columns ranked by the energy of their k largest entries: exact when m = 1
    col_energy = -np.sort(-(A * A), axis=0)[:k].sum(axis=0)
    for j in np.argsort(-col_energy, kind="stable")[: max(restarts // 2, 1)]:
        e = np.zeros(N)
        e[j] = 1.0
        starts.append(e)
    starts.append(np.linalg.svd(A, full_matrices=False)[2][0])
    while len(starts) < restarts:
        starts.append(rng.standard_normal(N))

    best = (-1.0, None, None, None)
    for y0 in starts[:restarts]:
        J = _top_indices(y0, m)
        y = np.zeros(N)
        y[J] = y0[J]
        if not np.any(y):
            y[J] = 1.0
        y /= np.linalg.norm(y)
        prev = -np.inf
        for _ in range(max_iter):
            s = A @ y
            I = _top_indices(s, k)
            obj = float(np.sum(s[I] ** 2))
            if obj > best[0]:
                best = (obj, I, J, y[J].copy())
            if obj - prev < 1e-12 * max(1.0, abs(obj)):
                break
            prev = obj
            AI = A[I]
            v = AI.T @ (AI @ y)
            J = _top_indices(v, m)
            AIJ = AI[:, J]
            _, vecs = np.linalg.eigh(AIJ.T @ AIJ)
            y = np.zeros(N)
            y[J] = vecs[:, -1]
    _, I, J, ysub = best
    return _certificate(A, I, J, ysub, "heuristic")


def gamma_km(A, k: int, m: int, method: str = "exact", **kwargs) -> GammaCertificate:
    if method == "exact":
        return gamma_km_exact(A, k, m, **{k_: v for k_, v in kwargs.items() if k_ in ("cap", "supports", "workers")})
    if method == "heuristic":
        return gamma_km_heuristic(A, k, m, **{k_: v for k_, v in kwargs.items() if k_ in ("restarts", "stream", "max_iter", "init")})
    raise ValueError(f"unknown method {method!r}")


def self_consistent_k(
    A,
    m: int,
    B: float,
    gamma_method: str = "exact",
    restarts: int = 20,
    stream: Optional[RandomStream] = None,
    cap: int = GAMMA_CAP,
) -> int:
    """Largest k <= n with k <= (Gamma_{k,m}(A) / B)^2, or 0 if none."""
    if B < 1:
        raise ValueError("B must be >= 1")
    A = as_matrix(A)
    n = A.shape[0]
    if stream is None:
        stream = RandomStream(0)
    found = 0
    warm = None
    for k in range(1, n + 1):
        if gamma_method == "exact":
            cert = gamma_km_exact(A, k, m, cap=cap)
        elif gamma_method == "heuristic":
            cert = gamma_km_heuristic(A, k, m, restarts=restarts, stream=stream.child(k), init=warm)
            warm = cert.direction
        else:
            raise ValueError(f"unknown gamma_method {gamma_method!r}")
        if k <= (cert.value / B) ** 2:
            found = k
    return found


# ---------------------------------------------------------------------------
# combinatorial thresholds


def _xlog(a: float, M: float) -> float:
    return a * math.log(math.e * M / a)


class KPrime(NamedTuple):
    value: int
    saturated: bool


def k_prime(m: int, n: int, N: int) -> KPrime:
    """Smallest l in 1..n with m log(eN/m) <= l log(en/l); saturated at n otherwise."""
    if not 1 <= m <= N or n < 1:
        raise ValueError("need 1 <= m <= N and n >= 1")
    target = _xlog(m, N)
    tol = 1e-12 * max(1.0, target)
    for ell in range(1, n + 1):
        if target <= _xlog(ell, n) + tol:
            return KPrime(ell, False)
    return KPrime(n, True)


def lambda_threshold(k: int, m: int, n: int, N: int) -> float:
    """sqrt(log log 3m) sqrt(m) log(eN/m) + sqrt(k) log(en/k)."""
    if not (1 <= k <= n <= N and 1 <= m <= N):
        raise ValueError("need 1 <= k <= n <= N and 1 <= m <= N")
    return (
        math.sqrt(math.log(math.log(3 * m))) * math.sqrt(m) * math.log(math.e * N / m)
        + math.sqrt(k) * math.log(math.e * n / k)
    )


# ---------------------------------------------------------------------------
# dense CSV


def write_matrix_csv(path, A) -> None:
    A = as_matrix(A)
    with open(path, "w") as fh:
        for row in A:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2))
