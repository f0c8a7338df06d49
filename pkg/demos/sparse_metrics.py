"""
RIP constants and Gamma_{k,m}
=============================

Gamma_{k,m} is the largest operator norm of a k x m submatrix. It is
computed exactly by enumeration or bounded from below by alternating
maximisation. Both return a certificate (rows I, support J, direction y)
that reproduces the value.
"""

import math

import numpy as np

from lcrip import RandomStream, metrics

A = np.array([[1.0, 2.0], [3.0, 4.0]])
for k, m in ((1, 1), (1, 2), (2, 1), (2, 2)):
    c = metrics.gamma_km_exact(A, k, m)
    print(f"Gamma_{k}{m} = {c.value:.7f}  I={c.row_set} J={c.support}")

# The heuristic on a random 8 x 10 matrix, checked against enumeration
stream = RandomStream(7)
G = stream.generator().standard_normal((8, 10))
exact = metrics.gamma_km_exact(G, 3, 3)
heur = metrics.gamma_km_heuristic(G, 3, 3, restarts=20, stream=stream.child(1))
print("exact", exact.value, "heuristic", heur.value)
print("certificate reproduces:", math.isclose(heur.recompute(G), heur.value, rel_tol=1e-9))
print(heur.to_json())

# delta_m of a normalised gaussian matrix; the witness support is returned
n, N = 32, 64
B = stream.child(2).generator().standard_normal((n, N)) / math.sqrt(n)
for m in (1, 2, 3):
    r = metrics.delta_m_exact(B, m)
    print(f"delta_{m} = {r.value:.4f} ({r.side} side, J={r.witness_support}, {r.supports_checked} supports)")

# Too many supports: sample them instead and get a lower bound
r = metrics.delta_m_sampled(B, 6, 20_000, stream.child(3))
print(f"delta_6 >= {r.value:.4f} from {r.supports_checked} random supports")

# Combinatorial thresholds
print("k' (m=2, n=16, N=16):", metrics.k_prime(2, 16, 16))
print("k' (m=4, n=8, N=16):", metrics.k_prime(4, 8, 16))
print("lambda(2, 4, 8, 16) =", metrics.lambda_threshold(2, 4, 8, 16))

# self-consistent k: largest k with k <= (Gamma_{k,m} / B)^2
print("k for 2*I_4, m=1, B=1:", metrics.self_consistent_k(2 * np.eye(4), 1, 1.0))
