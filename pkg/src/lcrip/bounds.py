"""Closed-form evaluation of the tail and sample-complexity bounds.

Every unspecified absolute constant is an explicit parameter (``C``, ``c``)
defaulting to 1 and echoed back in the result; the constant inside
``m log(C N / m)`` of the RIP premise defaults to e so that the logarithm
stays positive at m = N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .metrics import lambda_threshold
from .tails import SigmaProfile, TailCurve, sigma_inverse

__all__ = [
    "BOUND_IDS",
    "DomainError",
    "BoundQuery",
    "BoundResult",
    "evaluate_bound",
    "m0_scan",
    "FittedConstant",
    "fit_constant",
]

BOUND_IDS = (
    "lemma1",
    "eq2_premise",
    "thm3",
    "thm4",
    "thm5",
    "cor6",
    "thm7",
    "thm8_lhs",
    "sigma_weighted",
)

_REQUIRED = {
    "lemma1": ("T", "theta", "B", "n"),
    "eq2_premise": ("m", "N", "n", "theta", "B"),
    "thm3": ("t", "m", "N"),
    "thm4": ("t", "m", "N"),
    "thm5": ("t", "ell", "N"),
    "cor6": ("t", "m", "N", "b"),
    "thm7": ("t", "k", "m", "n", "N"),
    "thm8_lhs": ("m", "N", "n"),
    "sigma_weighted": ("p", "x"),
}

_DEFAULT_CONSTANTS = {
    "eq2_premise": {"C": math.e},
    "thm3": {"C": 1.0},
    "thm4": {"C": 1.0},
    "thm5": {"C": 1.0},
    "cor6": {"C": 1.0},
    "thm7": {"C": 1.0},
    "thm8_lhs": {"c": 1.0},
    "sigma_weighted": {"C": 1.0},
}


class DomainError(ValueError):
    """Parameters fall outside the premises of the requested bound."""


@dataclass
class BoundQuery:
    bound_id: str
    parameters: dict = field(default_factory=dict)
    profile: Optional[SigmaProfile] = None
    sigma_mode: str = "profile"


@dataclass
class BoundResult:
    bound_id: str
    value: float
    aux: dict
    constants: dict

    def to_dict(self) -> dict:
        return {"bound_id": self.bound_id, "value": self.value, "aux": self.aux, "constants": self.constants}


def m0_scan(u: float, m: int, N: int) -> int:
    """sup{k <= m : k log(eN/k) <= u}, or 0 when no k qualifies."""
    best = 0
    for k in range(1, m + 1):
        if k * math.log(math.e * N / k) <= u:
            best = k
    return best


def _require(cond: bool, premise: str) -> None:
    if not cond:
        raise DomainError(f"premise violated: {premise}")


def _sigma_inv(q: BoundQuery, u: float):
    if q.sigma_mode == "paper_upper":
        # sigma(p) <= p for isotropic log-concave laws
        return max(u, 1.0), False
    if q.sigma_mode != "profile":
        raise ValueError(f"unknown sigma_mode {q.sigma_mode!r}")
    if q.profile is None:
        raise ValueError(f"{q.bound_id} needs a sigma profile (or sigma_mode='paper_upper')")
    inv = sigma_inverse(q.profile, u)
    return inv.p, inv.saturated


def evaluate_bound(query: BoundQuery) -> BoundResult:
    """Evaluate one bound; out-of-domain inputs raise :class:`DomainError`."""
    bid = query.bound_id
    if bid not in BOUND_IDS:
        raise ValueError(f"unknown bound_id {bid!r}")
    P = dict(query.parameters)
    missing = [k for k in _REQUIRED[bid] if k not in P]
    if missing:
        raise ValueError(f"{bid}: missing parameter(s) {', '.join(missing)}")
    consts = dict(_DEFAULT_CONSTANTS.get(bid, {}))
    for key in consts:
        if key in P:
            consts[key] = float(P[key])
    C = consts.get("C", 1.0)
    if C <= 0 or consts.get("c", 1.0) <= 0:
        raise DomainError("premise violated: constants must be positive")
    aux = {}

    if bid in ("thm3", "thm4", "cor6", "thm7"):
        _require(P["t"] >= 1, "t >= 1")
    if "m" in P and "N" in P:
        _require(1 <= P["m"] <= P["N"], "1 <= m <= N")

    if bid == "lemma1":
        T, theta, B, n = P["T"], P["theta"], P["B"], P["n"]
        _require(T >= 1, "|T| >= 1")
        _require(0 < theta < 1, "0 < theta < 1")
        _require(B >= 1, "B >= 1")
        _require(n >= 1, "n >= 1")
        value = 1.0 - T * math.exp(-3.0 * theta**2 * n / (8.0 * B**2))

    elif bid == "eq2_premise":
        m, N, n, theta, B = P["m"], P["N"], P["n"], P["theta"], P["B"]
        _require(0 < theta < 1, "0 < theta < 1")
        _require(B >= 1, "B >= 1")
        lhs = m * math.log(C * N / m)
        rhs = 3.0 * theta**2 * n / (16.0 * B**2)
        aux = {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "probability": 1.0 - math.exp(-rhs)}
        value = float(lhs <= rhs)

    elif bid == "thm3":
        t, m, N = P["t"], P["m"], P["N"]
        s = math.sqrt(m) * math.log(math.e * N / m)
        aux = {"threshold": C * t * s}
        value = math.exp(-t * s / math.sqrt(math.log(math.e * m)))

    elif bid == "thm4":
        t, m, N = P["t"], P["m"], P["N"]
        u = t * math.sqrt(m) * math.log(math.e * N / m)
        p_u, sat_u = _sigma_inv(query, u)
        m0 = m0_scan(p_u, m, N)
        _require(m0 >= 1, "m0 admissible set {k <= m : k log(eN/k) <= sigma^-1(.)} non-empty")
        p_exp, sat = _sigma_inv(query, u / math.sqrt(math.log(math.e * m / m0)))
        aux = {"m0": m0, "threshold": C * u, "sigma_inverse": p_exp, "saturated": bool(sat or sat_u),
               "sigma_mode": query.sigma_mode}
        value = math.exp(-p_exp)

    elif bid == "thm5":
        t, ell, N = P["t"], P["ell"], P["N"]
        _require(1 <= ell <= N, "1 <= ell <= N")
        _require(t >= C * math.log(math.e * N / ell), "t >= C log(eN/ell)")
        p, sat = _sigma_inv(query, t * math.sqrt(ell) / C)
        aux = {"sigma_inverse": p, "saturated": sat, "sigma_mode": query.sigma_mode}
        value = math.exp(-p)

    elif bid == "cor6":
        t, m, N, b = P["t"], P["m"], P["N"], P["b"]
        lower = 1.0 / math.sqrt(m)
        if "x" in P:
            x = np.asarray(P["x"], dtype=float)
            _require(np.linalg.norm(x) <= 1 + 1e-12, "|x| <= 1")
            lower = max(lower, float(np.max(np.abs(x))))
        _require(lower <= b <= 1, "1 >= b >= max(||x||_inf, 1/sqrt(m))")
        s = math.sqrt(m) * math.log(math.e * N / m)
        aux = {"threshold": C * t * s}
        value = math.exp(-t * s / (b * math.sqrt(math.log(math.e**2 * b**2 * m))))

    elif bid == "thm7":
        t, k, m, n, N = P["t"], P["k"], P["m"], P["n"], P["N"]
        _require(1 <= k <= n <= N, "1 <= k <= n <= N")
        lam = lambda_threshold(k, m, n, N)
        aux = {"lambda": lam, "threshold": C * t * lam}
        value = math.exp(-t * lam / math.sqrt(math.log(3 * m)))

    elif bid == "thm8_lhs":
        m, N, n = P["m"], P["N"], P["n"]
        _require(1 <= n <= N, "1 <= n <= N")
        _require(m >= 1, "m >= 1")
        lhs = m * math.log(2.0 * N / n) ** 2 * math.log(math.log(3 * m))
        aux = {"ratio": lhs / n, "premise_holds": lhs <= consts["c"] * n}
        value = lhs

    else:  # sigma_weighted
        p = P["p"]
        _require(p >= 1, "p >= 1")
        x = np.asarray(P["x"], dtype=float)
        value = C * (math.sqrt(p) * float(np.linalg.norm(x)) + p * float(np.max(np.abs(x))))

    return BoundResult(bid, float(value), aux, consts)


# ---------------------------------------------------------------------------
# empirical constants


@dataclass(frozen=True)
class FittedConstant:
    C: float
    infinite: bool
    points_used: int


_SCALED = ("thm3", "cor6", "thm7")


def _dominated(curve: TailCurve, bound_id: str, params: dict, C: float, profile, sigma_mode):
    """(all in-domain points dominated, number of in-domain points)."""
    used = 0
    N = params["N"]
    if bound_id in _SCALED:
        if bound_id == "thm7":
            s = lambda_threshold(params["k"], params["m"], params["n"], N)
        else:
            s = math.sqrt(params["m"]) * math.log(math.e * N / params["m"])
        for thr, hi in zip(curve.thresholds, curve.ci_high):
            t = thr / (C * s)
            if t < 1:
                continue
            used += 1
            q = BoundQuery(bound_id, {**params, "t": t, "C": C})
            if hi > evaluate_bound(q).value * (1 + 1e-12):
                return False, used
        return True, used
    if bound_id == "thm5":
        ell = params["ell"]
        for thr, hi in zip(curve.thresholds, curve.ci_high):
            if thr < C * math.log(math.e * N / ell):
                continue
            used += 1
            q = BoundQuery("thm5", {**params, "t": thr, "C": C}, profile, sigma_mode)
            if hi > evaluate_bound(q).value * (1 + 1e-12):
                return False, used
        return True, used
    raise ValueError(f"fit_constant does not support {bound_id!r}")


def fit_constant(
    curve: TailCurve,
    bound_id: str,
    params: dict,
    profile: Optional[SigmaProfile] = None,
    sigma_mode: str = "profile",
    c_max: float = 1e3,
) -> FittedConstant:
    """Smallest C >= 1 for which the bound dominates the curve's upper CI.

    For thm3, cor6 and thm7 a curve point at threshold tau corresponds to
    t = tau / (C * scaling); for thm5 C divides the argument of sigma^-1 and
    sets the premise t >= C log(eN/ell). Points outside the premise impose no
    constraint, but at least one point must remain; otherwise the result is
    flagged infinite.
    """

    def ok(C):
        good, used = _dominated(curve, bound_id, params, C, profile, sigma_mode)
        return good and used > 0

    grid = np.geomspace(1.0, c_max, 2001)
    prev = None
    for C in grid:
        if ok(C):
            if prev is None:
                return FittedConstant(1.0, False, _dominated(curve, bound_id, params, 1.0, profile, sigma_mode)[1])
            lo, hi = prev, C
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            return FittedConstant(float(hi), False, _dominated(curve, bound_id, params, hi, profile, sigma_mode)[1])
        prev = C
    return FittedConstant(float("inf"), True, 0)
