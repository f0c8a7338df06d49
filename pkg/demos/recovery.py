"""
Basis pursuit and the RIP scaling
=================================

An m-sparse unit vector with +-1/sqrt(m) entries is measured by
Gamma / sqrt(n) and recovered by l1 minimisation. Recovery collapses once m
passes a threshold. The RIP constant of the normalised matrix shrinks as n
grows with N/n fixed.
"""

import numpy as np

from lcrip import DistributionSpec, RandomStream
from lcrip.recovery import basis_pursuit_full, delta_m_ensemble, recovery_experiment

stream = RandomStream(5)

# a single underdetermined system
A = np.array([[1.0, 1.0]])
r = basis_pursuit_full(A, [1.0])
print("z =", r.z, "l1 =", r.l1, "duality gap =", r.duality_gap)

# phase transition at n=64, N=256
spec = DistributionSpec("gaussian", 256)
for m in (5, 10, 20, 30, 40):
    res = recovery_experiment(spec, 64, 256, m, 50, stream.child(m))
    lo, hi = res.ci()
    print(f"m={m:2d}: success {res.success_rate:.2f}  CI [{lo:.2f}, {hi:.2f}]")

# median delta_m(Gamma/sqrt n) for N = 4n
for n in (64, 128, 256):
    ens = delta_m_ensemble(DistributionSpec("gaussian", 4 * n), n, 1, 20, stream=stream.child(1000 + n))
    print(f"n={n}: median delta_1 {ens.median:.3f}, q90 {ens.q90:.3f}")
