"""Fast built-in checks of the exact (trivially checkable) examples."""

from __future__ import annotations

import math

import numpy as np

from . import bounds, metrics, tails
from .metrics import TooLargeError
from .recovery import basis_pursuit, delta_m_ensemble, recovery_experiment
from .sampler import DistributionSpec, RandomStream, isotropic_scale, sample_matrix, sample_vector


def _raises(fn, exc=Exception) -> bool:
    try:
        fn()
    except exc:
        return True
    return False


def _checks():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    s = RandomStream(2024)
    lap = DistributionSpec("laplace_product", 6)
    yield "isotropic_scale gaussian is 1", all(isotropic_scale("gaussian", N) == 1.0 for N in (1, 5, 50))
    yield "weighted_sum with weights e_1 equals its base draw", np.array_equal(
        sample_vector(DistributionSpec("weighted_sum", 0, (1.0, 0.0, 0.0), lap), s), sample_vector(lap, s)
    )
    yield "sample_matrix rejects n=0", _raises(lambda: sample_matrix(lap, 0, s), ValueError)
    g = DistributionSpec("gaussian", 2)
    yield "sample_matrix is deterministic", np.array_equal(sample_matrix(g, 3, s), sample_matrix(g, 3, s))

    yield "operator_norm(I_3) = 1", abs(metrics.operator_norm(np.eye(3)) - 1.0) < 1e-12
    yield "operator_norm((3,4)) = 5", abs(metrics.operator_norm([[3.0, 4.0]]) - 5.0) < 1e-12
    x = np.array([3.0, -1.0, 2.0])
    yield "top_m_energy((3,-1,2), 2) = sqrt 13", abs(metrics.top_m_energy(x, 2) - math.sqrt(13)) < 1e-12
    yield "top_m_energy(x, N) = |x|", abs(metrics.top_m_energy(x, 3) - np.linalg.norm(x)) < 1e-12
    yield "top_m_energy((1,1,1,1), 1) = 1", metrics.top_m_energy(np.ones(4), 1) == 1.0
    yield "order_statistic((3,-1,2), 1) = 3", metrics.order_statistic(x, 1) == 3.0
    yield "order_statistic((3,-1,2), 3) = 1", metrics.order_statistic(x, 3) == 1.0
    yield "order_statistic((-5,5), 2) = 5", metrics.order_statistic([-5.0, 5.0], 2) == 5.0
    yield "delta_1(I_2) = 0", metrics.delta_m_exact(np.eye(2), 1).value == 0.0
    d = metrics.delta_m_exact(np.diag([2.0, 1.0]), 1)
    yield "delta_1(diag(2,1)) = 3 at J={1}", d.value == 3.0 and d.witness_support == (0,)
    c = metrics.gamma_km_exact(A, 1, 1)
    yield "Gamma_11 = max entry 4", c.value == 4.0 and c.row_set == (1,) and c.support == (1,)
    yield "Gamma_11(I_4) heuristic = 1", abs(metrics.gamma_km_heuristic(np.eye(4), 1, 1, 3, s).value - 1) < 1e-12
    big = np.full((2, 2), 1.0)
    yield "self_consistent_k with huge B = 0", metrics.self_consistent_k(
        big, 1, 10 * np.max(np.abs(big)) * math.sqrt(2 * 1)
    ) == 0
    yield "k_prime(m=1, N=n) = 1", all(metrics.k_prime(1, n, n) == (1, False) for n in (1, 7, 100))
    n_, N_ = 8, 16
    diff = metrics.lambda_threshold(2, 4, n_, 2 * N_) - metrics.lambda_threshold(2, 4, n_, N_)
    yield "lambda(2N) - lambda(N) identity", abs(diff - math.sqrt(math.log(math.log(12))) * 2 * math.log(2)) < 1e-12

    yield "sigma_closed_form(gaussian, 2) = 1", abs(tails.sigma_closed_form(g, 2) - 1.0) < 1e-12
    yield "sigma_closed_form(laplace, 4) unavailable", tails.sigma_closed_form(lap, 4) is None
    prof = tails.SigmaProfile.from_function(lambda p: p / 2, np.arange(1, 21))
    yield "sigma_inverse left clamp", tails.sigma_inverse(prof, 0.5).p == 1.0
    yield "sigma_inverse synthetic p/2 at 5 = 10", abs(tails.sigma_inverse(prof, 5.0).p - 10.0) < 1e-12
    gprof = tails.SigmaProfile.from_function(lambda p: tails.sigma_closed_form(g, p), tails.DEFAULT_P_GRID)
    yield "sigma_inverse gaussian at 1 = 2", abs(tails.sigma_inverse(gprof, 1.0).p - 2.0) < 1e-12
    curve = tails.TailCurve.synthetic(np.arange(1.0, 5.0), np.arange(1.0, 5.0), np.zeros(4))
    fit = bounds.fit_constant(curve, "thm3", {"m": 2, "N": 8})
    yield "fit_constant of a zero curve = 1", fit.C == 1.0 and not fit.infinite
    t = np.arange(1.0, 5.0)
    sc = math.sqrt(2) * math.log(4 * math.e)
    vals = np.array([bounds.evaluate_bound(bounds.BoundQuery("thm3", {"t": u, "m": 2, "N": 8})).value for u in t])
    c2 = tails.TailCurve.synthetic(t, t * sc, vals)
    yield "fit_constant of the thm3 bound itself = 1", bounds.fit_constant(c2, "thm3", {"m": 2, "N": 8}).C == 1.0

    z = basis_pursuit(np.eye(3), [1.0, 0.0, -2.0])
    yield "basis_pursuit(I, b) = b", np.allclose(z, [1.0, 0.0, -2.0], atol=1e-12)
    r = recovery_experiment(DistributionSpec("gaussian", 8), 8, 8, 1, 5, s)
    yield "square gaussian system recovers 1-sparse", r.success_rate == 1.0
    r1 = recovery_experiment(DistributionSpec("gaussian", 8), 8, 8, 1, 5, s, workers=4)
    yield "recovery records independent of workers", [x.to_dict() for x in r.trials] == [x.to_dict() for x in r1.trials]
    e = delta_m_ensemble(DistributionSpec("gaussian", 4), 2, 1, 10, stream=s)
    yield "delta_m values non-negative", bool(np.all(e.values >= 0))
    yield "delta_m cap enforced", _raises(lambda: metrics.delta_m_exact(np.eye(30), 10), TooLargeError)


def run_selftest(verbose: bool = True) -> int:
    """Run all checks; returns the number of failures."""
    failures = 0
    for name, ok in _checks():
        ok = bool(ok)
        failures += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return failures
