"""Restricted isometry and sparse submatrix norms of random matrices with
independent isotropic log-concave rows: samplers, exact and heuristic
metrics, Monte Carlo tail laboratories and basis pursuit experiments."""

from .sampler import DistributionSpec, RandomStream, isotropic_scale, sample_matrix, sample_vector, sample_vectors
from .metrics import (
    GammaCertificate,
    DeltaReport,
    TooLargeError,
    delta_m_exact,
    delta_m_sampled,
    gamma_km_exact,
    gamma_km_heuristic,
    k_prime,
    lambda_threshold,
    operator_norm,
    order_statistic,
    self_consistent_k,
    top_m_energy,
)
from .tails import SigmaProfile, Statistic, TailCurve, paouris_ratio, sigma_closed_form, sigma_estimate, sigma_inverse, sigma_profile, tail_curve
from .bounds import BoundQuery, DomainError, evaluate_bound, fit_constant
from .recovery import basis_pursuit, delta_m_ensemble, recovery_experiment

__version__ = "0.1.0"
