"""
Evaluating the tail and sample-complexity bounds
================================================

Each bound is a closed form with its unspecified absolute constants exposed
as parameters. Inputs outside a bound's premises raise DomainError instead
of being extrapolated.
"""

from lcrip.bounds import BoundQuery, DomainError, evaluate_bound, m0_scan
from lcrip.sampler import DistributionSpec, RandomStream
from lcrip.tails import sigma_profile


def show(bound_id, profile=None, mode="profile", **params):
    res = evaluate_bound(BoundQuery(bound_id, params, profile, mode))
    print(f"{bound_id:14s} {res.value:.6g}  aux={res.aux}  constants={res.constants}")


show("lemma1", T=1, theta=0.5, B=1, n=8)
show("eq2_premise", m=2, N=100, n=2000, theta=0.5, B=1)
show("thm3", t=1, m=4, N=16)
show("cor6", t=1, m=4, N=16, b=1)
show("thm7", t=1, k=2, m=4, n=8, N=16)
show("thm8_lhs", m=10, N=1024, n=512)
show("sigma_weighted", p=4, x=[0.6, 0.8])

# thm4 and thm5 need sigma^-1, from an estimated profile or the upper value p
prof = sigma_profile(DistributionSpec("laplace", 50), trials=20_000, stream=RandomStream(3))
show("thm4", prof, t=1.5, m=4, N=50)
show("thm4", None, "paper_upper", t=1.5, m=4, N=50)
show("thm5", prof, t=9, ell=2, N=50)

# m0 is the largest k <= m with k log(eN/k) <= u
print("m0(u=10, m=8, N=16) =", m0_scan(10, 8, 16))

try:
    show("thm5", prof, t=1, ell=1, N=1000)
except DomainError as exc:
    print("rejected:", exc)
