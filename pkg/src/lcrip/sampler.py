"""Isotropic log-concave random vectors and matrices with independent rows.

Randomness is split-based: a :class:`RandomStream` is a master seed plus a
path of non-negative integers, and every draw comes from a fresh
``numpy.random.Generator`` seeded by ``SeedSequence(master_seed, spawn_key=path)``.
Child streams extend the path, so the output of any task depends only on its
own path and never on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "KINDS",
    "ALIASES",
    "InvalidSpecError",
    "DistributionSpec",
    "RandomStream",
    "isotropic_scale",
    "sample_vector",
    "sample_vectors",
    "sample_matrix",
    "weighted_sum_spec",
]

KINDS = (
    "gaussian",
    "laplace_product",
    "uniform_cube_product",
    "uniform_ball",
    "uniform_l1_ball",
    "weighted_sum",
)

# canonical textual names used in config files
ALIASES = {
    "gaussian": "gaussian",
    "laplace": "laplace_product",
    "cube": "uniform_cube_product",
    "ball": "uniform_ball",
    "l1ball": "uniform_l1_ball",
    "wsum": "weighted_sum",
}
SHORT_NAMES = {v: k for k, v in ALIASES.items()}


class InvalidSpecError(ValueError):
    """Raised for an unknown kind or an inconsistent distribution spec."""


def _canonical_kind(kind: str) -> str:
    if kind in KINDS:
        return kind
    if kind in ALIASES:
        return ALIASES[kind]
    raise InvalidSpecError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class DistributionSpec:
    """Declarative description of an isotropic log-concave law on R^N.

    For ``weighted_sum`` the law is that of ``Y = sum_i weights[i] * X_i`` with
    ``X_i`` independent copies of ``base``; ``dimension`` is taken from the base.
    """

    kind: str
    dimension: int = 0
    weights: Optional[tuple] = None
    base: Optional["DistributionSpec"] = None

    def __post_init__(self):
        kind = _canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == "weighted_sum":
            if self.base is None or self.weights is None:
                raise InvalidSpecError("weighted_sum needs both weights and base")
            if self.base.kind == "weighted_sum":
                raise InvalidSpecError("weighted_sum base cannot itself be weighted_sum")
            w = tuple(float(x) for x in self.weights)
            if len(w) == 0 or not all(math.isfinite(x) for x in w):
                raise InvalidSpecError("weights must be a non-empty finite sequence")
            object.__setattr__(self, "weights", w)
            if self.dimension not in (0, self.base.dimension):
                raise InvalidSpecError("weighted_sum dimension must match its base")
            object.__setattr__(self, "dimension", self.base.dimension)
        else:
            if self.weights is not None or self.base is not None:
                raise InvalidSpecError(f"{kind} takes no weights/base")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InvalidSpecError(f"dimension must be a positive integer, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))

    @property
    def name(self) -> str:
        return SHORT_NAMES[self.kind]

    def to_dict(self) -> dict:
        d = {"kind": self.name, "dimension": self.dimension}
        if self.kind == "weighted_sum":
            d["weights"] = list(self.weights)
            d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        base = d.get("base")
        if base is not None:
            base = cls.from_dict(base)
        weights = d.get("weights")
        return cls(
            kind=d["kind"],
            dimension=int(d.get("dimension", 0)),
            weights=tuple(weights) if weights is not None else None,
            base=base,
        )


@dataclass(frozen=True)
class RandomStream:
    """Deterministic, splittable source of randomness."""

    master_seed: int
    path: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if any(int(i) < 0 for i in self.path):
            raise ValueError("stream path entries must be non-negative")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))

    def child(self, *index: int) -> "RandomStream":
        return RandomStream(self.master_seed, self.path + tuple(index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def isotropic_scale(kind: str, N: int) -> float:
    """Scale turning the unit-parameter law of ``kind`` into an isotropic one.

    gaussian: 1, laplace_product: Laplace scale 1/sqrt(2), uniform_cube_product:
    half-width sqrt(3), uniform_ball: radius sqrt(N+2), uniform_l1_ball: radius
    sqrt((N+1)(N+2)/2).
    """
    kind = _canonical_kind(kind)
    if N < 1:
        raise InvalidSpecError("N must be >= 1")
    if kind == "gaussian":
        return 1.0
    if kind == "laplace_product":
        return 1.0 / math.sqrt(2.0)
    if kind == "uniform_cube_product":
        return math.sqrt(3.0)
    if kind == "uniform_ball":
        return math.sqrt(N + 2.0)
    if kind == "uniform_l1_ball":
        return math.sqrt((N + 1.0) * (N + 2.0) / 2.0)
    raise InvalidSpecError("weighted_sum has no intrinsic scale")


def _draw(spec: DistributionSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    N = spec.dimension
    kind = spec.kind
    if kind == "weighted_sum":
        w = np.asarray(spec.weights)
        out = np.zeros((size, N))
        for wi in w:
            # one base draw per weight, in a fixed order
            x = _draw(spec.base, size, rng)
            if wi != 0.0:
                out += wi * x
        return out
    s = isotropic_scale(kind, N)
    if kind == "gaussian":
        return rng.standard_normal((size, N))
    if kind == "laplace_product":
        return rng.laplace(0.0, s, (size, N))
    if kind == "uniform_cube_product":
        return rng.uniform(-s, s, (size, N))
    if kind == "uniform_ball":
        g = rng.standard_normal((size, N))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = rng.random(size) ** (1.0 / N)
        return s * r[:, None] * g
    if kind == "uniform_l1_ball":
        # (E_1..E_N)/sum(E_1..E_{N+1}) is uniform on the positive part of the
        # unit l1 ball; independent signs make it uniform on the whole ball
        e = rng.standard_exponential((size, N + 1))
        x = e[:, :N] / e.sum(axis=1, keepdims=True)
        signs = rng.integers(0, 2, (size, N)) * 2 - 1
        return s * signs * x
    raise InvalidSpecError(f"unknown kind {kind!r}")


def sample_vectors(spec: DistributionSpec, size: int, stream: RandomStream) -> np.ndarray:
    """``size`` independent draws (rows of the result) from one stream."""
    if size < 1:
        raise ValueError("size must be >= 1")
    return _draw(spec, int(size), stream.generator())


def sample_vector(spec: DistributionSpec, stream: RandomStream) -> np.ndarray:
    """One draw of length ``spec.dimension``."""
    return _draw(spec, 1, stream.generator())[0]


def sample_matrix(
    spec: DistributionSpec, n: int, stream: RandomStream, workers: int = 1
) -> np.ndarray:
    """n x N matrix whose row ``i`` is drawn from ``stream.child(i)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"row count must be a positive integer, got {n}")
    n = int(n)
    out = np.empty((n, spec.dimension))

    def fill(i):
        out[i] = sample_vector(spec, stream.child(i))

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(n)))
    else:
        for i in range(n):
            fill(i)
    return out


def weighted_sum_spec(weights: Sequence[float], base: DistributionSpec) -> DistributionSpec:
    return DistributionSpec("weighted_sum", base.dimension, tuple(weights), base)
