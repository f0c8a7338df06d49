"""
sigma_X(p) and empirical tail curves
====================================

sigma_X(p) is the largest p-th moment of a one-dimensional marginal. Only
the gaussian case has a closed form. Otherwise a direction search gives a
lower value, and p is the known upper value.
"""

import numpy as np

from lcrip import DistributionSpec, RandomStream, tails
from lcrip.bounds import fit_constant

stream = RandomStream(11)

gauss = DistributionSpec("gaussian", 10)
for p in (2, 4, 6):
    est = tails.sigma_estimate(gauss, p, 100_000, stream=stream.child(p))
    print(f"p={p}: estimate {est.value:.4f}, closed form {tails.sigma_closed_form(gauss, p):.4f}")

# On the cube the diagonal direction beats the coordinate axes at p=4
cube = DistributionSpec("cube", 2)
est = tails.sigma_estimate(cube, 4, 100_000, search="sphere_ascent", stream=stream.child(40))
print("cube sigma(4) >=", round(est.value, 4), "direction", np.round(est.direction, 3), "vs 2.4**0.25 =",
      round(2.4 ** 0.25, 4))

prof = tails.sigma_profile(DistributionSpec("laplace", 10), trials=50_000, stream=stream.child(50))
for p, v, method in prof.rows():
    print(f"  sigma({p:4.1f}) = {v:.4f}  [{method}]  <= {p}")
print("sigma^-1(3) =", tails.sigma_inverse(prof, 3.0))

# Norm moments against (E|X|^2)^(1/2) + sigma(p)
for p in (1, 2, 4, 8):
    r = tails.paouris_ratio(DistributionSpec("laplace", 100), p, 50_000, stream.child(60, p))
    print(f"p={p}: ratio {r.ratio:.4f}")

# Survival of the largest rank-m coordinate projection, at thresholds t sqrt(m) log(eN/m)
spec = DistributionSpec("laplace", 200)
curve = tails.tail_curve(spec, tails.Statistic.projection_sup(5), trials=10_000, stream=stream.child(70))
for t, s, lo, hi in zip(curve.t_grid, curve.survival_text(), curve.ci_low, curve.ci_high):
    print(f"  t={t:4.2f}  survival {s:>9s}  CI [{lo:.2e}, {hi:.2e}]")
print(fit_constant(curve, "thm3", {"m": 5, "N": 200}))

# Order statistics on a raw t scale; the slope of log survival is fitted
# only where both hits and misses are plentiful
curve = tails.tail_curve(DistributionSpec("laplace", 1000), tails.Statistic.order_stat(10),
                         np.linspace(1, 3, 9), 20_000, stream.child(80))
print("log-survival slope (ell=10):", tails.log_survival_slope(curve, 1, 3))
