"""Monte Carlo estimation of sigma_X(p), norm moments and tail curves.

Vector statistics are drawn in fixed-size blocks, block ``b`` from
``stream.child(b)``; matrix statistics draw trial ``t`` from
``stream.child(t)``. Results therefore do not depend on the worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import special, stats

from . import metrics
from .sampler import DistributionSpec, RandomStream, sample_matrix, sample_vectors

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_P_GRID",
    "DEFAULT_T_GRID",
    "SigmaProfile",
    "SigmaEstimate",
    "SigmaInverse",
    "PaourisRatio",
    "Statistic",
    "TailCurve",
    "clopper_pearson",
    "sigma_closed_form",
    "sigma_estimate",
    "sigma_profile",
    "sigma_inverse",
    "paouris_ratio",
    "statistic_samples",
    "tail_curve",
    "curve_from_samples",
    "log_survival_slope",
]

DEFAULT_P_GRID = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0)
DEFAULT_T_GRID = tuple(1.0 + 0.25 * i for i in range(13))
BLOCK = 4096
MIN_SIGMA_TRIALS = 1000
MIN_TAIL_TRIALS = 100
N_RANDOM_DIRECTIONS = 100


def clopper_pearson(hits, trials: int, level: float = 0.95):
    """Exact binomial interval(s) for ``hits`` successes out of ``trials``."""
    hits = np.asarray(hits, dtype=float)
    a = (1.0 - level) / 2.0
    lo = np.where(hits > 0, stats.beta.ppf(a, np.maximum(hits, 1e-300), trials - hits + 1), 0.0)
    hi = np.where(hits < trials, stats.beta.ppf(1 - a, hits + 1, np.maximum(trials - hits, 1e-300)), 1.0)
    return lo, hi


# ---------------------------------------------------------------------------
# sigma_X(p)


def sigma_closed_form(spec: DistributionSpec, p: float) -> Optional[float]:
    """Exact sigma_X(p) where known (gaussian only), else None."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if spec.kind != "gaussian":
        return None
    # E|g|^p for a standard normal g
    logm = 0.5 * p * math.log(2.0) + special.gammaln((p + 1) / 2.0) - 0.5 * math.log(math.pi)
    return math.exp(logm / p)


class SigmaEstimate(NamedTuple):
    value: float
    method: str
    direction: np.ndarray
    paper_upper: float


def _candidate_directions(N: int, stream: RandomStream) -> np.ndarray:
    dirs = [np.eye(N), np.full((1, N), 1.0 / math.sqrt(N))]
    g = stream.generator().standard_normal((N_RANDOM_DIRECTIONS, N))
    dirs.append(g / np.linalg.norm(g, axis=1, keepdims=True))
    return np.vstack(dirs)


def _moments(X: np.ndarray, T: np.ndarray, p: float) -> np.ndarray:
    """mean over rows of X of |<x, t>|^p, for each row t of T."""
    acc = np.zeros(len(T))
    for i in range(0, len(X), BLOCK):
        acc += (np.abs(X[i:i + BLOCK] @ T.T) ** p).sum(axis=0)
    return acc / len(X)


def _sphere_ascent(X: np.ndarray, t: np.ndarray, p: float, value: float, steps: int = 50):
    step = 0.5
    for _ in range(steps):
        g = np.zeros_like(t)
        for i in range(0, len(X), BLOCK):
            s = X[i:i + BLOCK] @ t
            g += (np.abs(s) ** (p - 1) * np.sign(s)) @ X[i:i + BLOCK]
        g -= (g @ t) * t
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            break
        while step > 1e-6:
            cand = t + step * g / gn
            cand /= np.linalg.norm(cand)
            v = _moments(X, cand[None, :], p)[0]
            if v > value:
                t, value = cand, v
                step = min(step * 2.0, 1.0)
                break
            step /= 2.0
        else:
            break
    return t, value


def _search(X: np.ndarray, p: float, search: str, dir_stream: RandomStream):
    T = _candidate_directions(X.shape[1], dir_stream)
    mom = _moments(X, T, p)
    j = int(np.argmax(mom))
    t, best = T[j], mom[j]
    if search == "sphere_ascent":
        t, best = _sphere_ascent(X, t, p, best)
    elif search != "canonical_plus_random":
        raise ValueError(f"unknown search {search!r}")
    return best ** (1.0 / p), t


def sigma_estimate(
    spec: DistributionSpec,
    p: float,
    trials: int,
    search: str = "canonical_plus_random",
    stream: Optional[RandomStream] = None,
    samples: Optional[np.ndarray] = None,
) -> SigmaEstimate:
    """Direction-search lower estimate of sigma_X(p).

    Maximises the empirical p-th moment of <t, X> over the coordinate
    directions, the normalised all-ones vector and 100 random directions;
    ``sphere_ascent`` continues with projected gradient ascent on the same
    sample. The upper value p (sigma(p) <= p for isotropic log-concave
    laws) is returned alongside.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if trials < MIN_SIGMA_TRIALS:
        raise ValueError(f"trials must be >= {MIN_SIGMA_TRIALS}, got {trials}")
    if stream is None:
        stream = RandomStream(0)
    X = samples if samples is not None else sample_vectors(spec, trials, stream.child(0))
    value, t = _search(X, p, search, stream.child(1))
    return SigmaEstimate(float(value), "direction_search_lower", t, float(p))


@dataclass
class SigmaProfile:
    """sigma_X(p) tabulated on an increasing p-grid."""

    p_grid: np.ndarray
    values: np.ndarray
    methods: tuple
    spec: Optional[DistributionSpec] = None
    trials: int = 0
    correction: float = 0.0

    def __post_init__(self):
        self.p_grid = np.asarray(self.p_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.p_grid.size == 0 or self.p_grid.shape != self.values.shape:
            raise ValueError("profile needs matching non-empty p_grid and values")
        if np.any(np.diff(self.p_grid) <= 0):
            raise ValueError("p_grid must be strictly increasing")

    @classmethod
    def from_function(cls, fn, p_grid: Sequence[float], method: str = "closed_form") -> "SigmaProfile":
        p = np.asarray(p_grid, dtype=float)
        return cls(p, np.array([fn(x) for x in p]), (method,) * len(p))

    def paper_upper(self) -> np.ndarray:
        return self.p_grid.copy()

    def rows(self):
        for p, v, m in zip(self.p_grid, self.values, self.methods):
            yield float(p), float(v), m


def sigma_profile(
    spec: DistributionSpec,
    p_grid: Sequence[float] = DEFAULT_P_GRID,
    trials: int = 100_000,
    search: str = "canonical_plus_random",
    stream: Optional[RandomStream] = None,
) -> SigmaProfile:
    """sigma_X over ``p_grid`` from one shared sample, made monotone by a running max."""
    if stream is None:
        stream = RandomStream(0)
    p_grid = np.asarray(p_grid, dtype=float)
    X = None
    values, methods = [], []
    for p in p_grid:
        exact = sigma_closed_form(spec, p)
        if exact is not None:
            values.append(exact)
            methods.append("closed_form")
            continue
        if X is None:
            if trials < MIN_SIGMA_TRIALS:
                raise ValueError(f"trials must be >= {MIN_SIGMA_TRIALS}")
            X = sample_vectors(spec, trials, stream.child(0))
        values.append(_search(X, p, search, stream.child(1))[0])
        methods.append("direction_search_lower")
    raw = np.array(values)
    fixed = np.maximum.accumulate(raw)
    correction = float(np.max(fixed - raw))
    if correction > 0:
        log.info("sigma profile isotonic correction %.3g", correction)
    return SigmaProfile(p_grid, fixed, tuple(methods), spec, int(trials), correction)


class SigmaInverse(NamedTuple):
    p: float
    saturated: bool


def sigma_inverse(profile: SigmaProfile, u: float) -> SigmaInverse:
    """Smallest p on the grid range with (linearly interpolated) sigma(p) >= u."""
    p, v = profile.p_grid, profile.values
    if p.size == 0:
        raise ValueError("empty profile")
    if np.any(np.diff(v) < 0):
        raise ValueError("profile must be non-decreasing")
    if u <= v[0]:
        return SigmaInverse(float(p[0]), False)
    if u > v[-1]:
        return SigmaInverse(float(p[-1]), True)
    j = int(np.argmax(v >= u))
    # v[j-1] < u <= v[j]
    frac = (u - v[j - 1]) / (v[j] - v[j - 1])
    return SigmaInverse(float(p[j - 1] + frac * (p[j] - p[j - 1])), False)


# ---------------------------------------------------------------------------
# norm moments


@dataclass(frozen=True)
class PaourisRatio:
    ratio: float
    norm_moment: float
    second_moment_root: float
    sigma: float
    p: float
    trials: int


def paouris_ratio(
    spec: DistributionSpec, p: float, trials: int, stream: Optional[RandomStream] = None
) -> PaourisRatio:
    """(E|X|^p)^(1/p) / ((E|X|^2)^(1/2) + sigma_hat(p)) from Monte Carlo."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if stream is None:
        stream = RandomStream(0)
    X = sample_vectors(spec, trials, stream.child(0))
    r = np.linalg.norm(X, axis=1)
    num = float(np.mean(r ** p) ** (1.0 / p))
    root2 = float(math.sqrt(np.mean(r * r)))
    sig = sigma_estimate(spec, p, trials, stream=stream.child(1), samples=X).value
    return PaourisRatio(num / (root2 + sig), num, root2, sig, float(p), int(trials))


# ---------------------------------------------------------------------------
# tail curves


@dataclass(frozen=True)
class Statistic:
    """Left-hand side statistic of a tail bound.

    kind is ``projection_sup`` (needs m), ``order_stat`` (needs ell) or
    ``gamma_km`` (needs n, k, m; ``method`` exact, heuristic or auto).
    """

    kind: str
    m: Optional[int] = None
    ell: Optional[int] = None
    n: Optional[int] = None
    k: Optional[int] = None
    method: str = "auto"
    restarts: int = 10

    @classmethod
    def projection_sup(cls, m: int) -> "Statistic":
        return cls("projection_sup", m=m)

    @classmethod
    def order_stat(cls, ell: int) -> "Statistic":
        return cls("order_stat", ell=ell)

    @classmethod
    def gamma_km(cls, n: int, k: int, m: int, method: str = "auto", restarts: int = 10) -> "Statistic":
        return cls("gamma_km", m=m, n=n, k=k, method=method, restarts=restarts)

    def validate(self, N: int) -> None:
        if self.kind == "projection_sup":
            if self.m is None or not 1 <= self.m <= N:
                raise ValueError("projection_sup needs 1 <= m <= N")
        elif self.kind == "order_stat":
            if self.ell is None or not 1 <= self.ell <= N:
                raise ValueError("order_stat needs 1 <= ell <= N")
        elif self.kind == "gamma_km":
            if None in (self.n, self.k, self.m) or not (1 <= self.k <= self.n and 1 <= self.m <= N):
                raise ValueError("gamma_km needs 1 <= k <= n and 1 <= m <= N")
            if self.method not in ("auto", "exact", "heuristic"):
                raise ValueError(f"unknown method {self.method!r}")
            if self.method != "exact" and self.restarts < 10:
                raise ValueError("heuristic gamma needs restarts >= 10")
        else:
            raise ValueError(f"unknown statistic {self.kind!r}")

    def scale(self, N: int) -> float:
        """Threshold per unit t: the bound scaling with its constant set to 1."""
        if self.kind == "projection_sup":
            return math.sqrt(self.m) * math.log(math.e * N / self.m)
        if self.kind == "order_stat":
            return 1.0
        return metrics.lambda_threshold(self.k, self.m, self.n, N)

    def resolved_method(self, N: int) -> str:
        if self.kind != "gamma_km" or self.method != "auto":
            return self.method
        pairs = math.comb(self.n, self.k) * math.comb(N, self.m)
        return "exact" if pairs <= metrics.GAMMA_CAP else "heuristic"

    def describe(self, N: int) -> str:
        if self.kind == "projection_sup":
            return f"projection_sup(m={self.m})"
        if self.kind == "order_stat":
            return f"order_stat(ell={self.ell})"
        meth = self.resolved_method(N)
        note = "" if meth == "exact" else ",lower_bound"
        return f"gamma_km(n={self.n},k={self.k},m={self.m},{meth}{note})"


def _pool_map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def statistic_samples(
    spec: DistributionSpec,
    statistic: Statistic,
    trials: int,
    stream: RandomStream,
    workers: int = 1,
) -> np.ndarray:
    """Independent realisations of ``statistic`` under ``spec``."""
    N = spec.dimension
    statistic.validate(N)
    if statistic.kind == "gamma_km":
        method = statistic.resolved_method(N)

        def one(t):
            sub = stream.child(t)
            A = sample_matrix(spec, statistic.n, sub.child(0))
            if method == "exact":
                return metrics.gamma_km_exact(A, statistic.k, statistic.m).value
            return metrics.gamma_km_heuristic(
                A, statistic.k, statistic.m, statistic.restarts, sub.child(1)
            ).value

        return np.array(_pool_map(one, range(trials), workers))

    def block(b):
        size = min(BLOCK, trials - b * BLOCK)
        X = sample_vectors(spec, size, stream.child(b))
        if statistic.kind == "projection_sup":
            return metrics.top_m_energy(X, statistic.m)
        return metrics.order_statistic(X, statistic.ell)

    n_blocks = -(-trials // BLOCK)
    return np.concatenate(_pool_map(block, range(n_blocks), workers))


@dataclass
class TailCurve:
    """Empirical survival P(statistic >= threshold(t)) with exact 95% intervals."""

    t_grid: np.ndarray
    thresholds: np.ndarray
    hits: np.ndarray
    trials: int
    statistic: str
    survival: np.ndarray = field(init=False)
    ci_low: np.ndarray = field(init=False)
    ci_high: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.hits = np.asarray(self.hits, dtype=np.int64)
        self.survival = self.hits / self.trials
        self.ci_low, self.ci_high = clopper_pearson(self.hits, self.trials)

    @classmethod
    def synthetic(cls, t_grid, thresholds, survival, trials: int = 1, statistic: str = "synthetic") -> "TailCurve":
        """Curve with prescribed survival values and degenerate intervals."""
        c = cls(t_grid, thresholds, np.zeros(len(t_grid), dtype=np.int64), trials, statistic)
        c.survival = np.asarray(survival, dtype=float)
        c.ci_low = c.survival.copy()
        c.ci_high = c.survival.copy()
        return c

    @property
    def censored(self) -> np.ndarray:
        return self.hits == 0

    def survival_text(self) -> list:
        return [f"<1/{self.trials}" if h == 0 else repr(float(s)) for h, s in zip(self.hits, self.survival)]


def curve_from_samples(samples, t_grid, scale: float, descriptor: str) -> TailCurve:
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be non-empty and strictly increasing")
    thr = scale * t
    samples = np.sort(np.asarray(samples, dtype=float))
    hits = len(samples) - np.searchsorted(samples, thr, side="left")
    return TailCurve(t, thr, hits, len(samples), descriptor)


def tail_curve(
    spec: DistributionSpec,
    statistic: Statistic,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    trials: int = 10_000,
    stream: Optional[RandomStream] = None,
    workers: int = 1,
) -> TailCurve:
    """Survival curve of ``statistic`` at thresholds t * (bound scaling)."""
    if trials < MIN_TAIL_TRIALS:
        raise ValueError(f"trials must be >= {MIN_TAIL_TRIALS}, got {trials}")
    if stream is None:
        stream = RandomStream(0)
    samples = statistic_samples(spec, statistic, trials, stream, workers)
    N = spec.dimension
    return curve_from_samples(samples, t_grid, statistic.scale(N), statistic.describe(N))


def log_survival_slope(curve: TailCurve, t_min: float = -np.inf, t_max: float = np.inf, min_count: int = 10):
    """Weighted least-squares slope of log survival against t, with a 95% interval.

    Only points with at least ``min_count`` hits and ``min_count`` misses are
    used: the delta-method variance of log p_hat, (1 - p_hat) / hits, is
    unreliable outside that range. Returns (slope, low, high), all NaN when
    fewer than two points qualify.
    """
    misses = curve.trials - curve.hits
    sel = (curve.t_grid >= t_min) & (curve.t_grid <= t_max) & (curve.hits >= min_count) & (misses >= min_count)
    t = curve.t_grid[sel]
    p = curve.survival[sel]
    if t.size < 2:
        return float("nan"), float("nan"), float("nan")
    var = (1.0 - p) / curve.hits[sel]
    y = np.log(p)
    w = 1.0 / var
    X = np.column_stack([np.ones_like(t), t])
    cov = np.linalg.pinv(X.T @ (w[:, None] * X))
    beta = cov @ X.T @ (w * y)
    se = math.sqrt(max(cov[1, 1], 0.0))
    return float(beta[1]), float(beta[1] - 1.96 * se), float(beta[1] + 1.96 * se)
