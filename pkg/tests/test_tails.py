import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from lcrip import tails
from lcrip.sampler import DistributionSpec, RandomStream, isotropic_scale
from lcrip.tails import (
    SigmaProfile,
    Statistic,
    TailCurve,
    clopper_pearson,
    curve_from_samples,
    log_survival_slope,
    paouris_ratio,
    sigma_closed_form,
    sigma_estimate,
    sigma_inverse,
    sigma_profile,
    tail_curve,
)

GAUSS = DistributionSpec("gaussian", 5)
KINDS = ["gaussian", "laplace", "cube", "ball", "l1ball"]


def _cube_pair_moment(p):
    # E|X1+X2|^p / 2^(p/2) for X_i uniform on [-sqrt3, sqrt3], by 2-d quadrature
    a = math.sqrt(3)
    val, _ = integrate.dblquad(lambda y, x: abs(x + y) ** p, -a, a, -a, a)
    return val / (2 * a) ** 2 / 2 ** (p / 2)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 6, 7.5])
def test_sigma_closed_form_matches_scipy(p):
    m = stats.norm.expect(lambda x: abs(x) ** p)
    assert sigma_closed_form(GAUSS, p) == pytest.approx(m ** (1 / p), rel=1e-9)


def test_sigma_closed_form_examples():
    assert sigma_closed_form(GAUSS, 2) == pytest.approx(1.0, abs=1e-12)
    assert sigma_closed_form(GAUSS, 4) == pytest.approx(3 ** 0.25, rel=1e-12)
    assert sigma_closed_form(DistributionSpec("laplace_product", 3), 4) is None
    with pytest.raises(ValueError):
        sigma_closed_form(GAUSS, 0.5)


def test_sigma_estimate_gaussian(stream):
    est = sigma_estimate(GAUSS, 4, 10**5, stream=stream)
    assert est.value == pytest.approx(3 ** 0.25, rel=0.03)
    assert est.method == "direction_search_lower" and est.paper_upper == 4.0
    assert np.linalg.norm(est.direction) == pytest.approx(1.0)


def test_sigma_estimate_laplace_basis(stream):
    spec = DistributionSpec("laplace_product", 10)
    est = sigma_estimate(spec, 4, 10**5, stream=stream)
    # E|X_1|^p = p! (1/sqrt2)^p for the isotropic Laplace coordinate
    assert est.value >= 24 ** 0.25 / math.sqrt(2) * 0.97


def test_sigma_estimate_cube_diagonal(stream):
    spec = DistributionSpec("uniform_cube_product", 2)
    diag = _cube_pair_moment(4) ** 0.25
    assert diag == pytest.approx(2.4 ** 0.25, rel=1e-8)
    assert diag > 1.8 ** 0.25
    est = sigma_estimate(spec, 4, 10**5, stream=stream)
    assert est.value >= 0.99 * diag
    assert abs(abs(est.direction[0]) - abs(est.direction[1])) < 0.1


def test_sigma_sphere_ascent_not_worse(stream):
    spec = DistributionSpec("uniform_cube_product", 4)
    a = sigma_estimate(spec, 6, 20000, stream=stream)
    b = sigma_estimate(spec, 6, 20000, search="sphere_ascent", stream=stream)
    assert b.value >= a.value - 1e-12


def test_sigma_estimate_validation(stream):
    with pytest.raises(ValueError):
        sigma_estimate(GAUSS, 2, 999, stream=stream)
    with pytest.raises(ValueError):
        sigma_estimate(GAUSS, 0.9, 10**4, stream=stream)
    with pytest.raises(ValueError):
        sigma_estimate(GAUSS, 2, 10**4, search="grid", stream=stream)


@pytest.mark.parametrize("kind", KINDS)
def test_sigma_two_is_one(kind, stream):
    prof = sigma_profile(DistributionSpec(kind, 6), [2.0], 10**5, stream=stream)
    assert prof.values[0] == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("kind", KINDS)
def test_sigma_profile_monotone_and_below_p(kind, stream):
    prof = sigma_profile(DistributionSpec(kind, 4), trials=20000, stream=stream)
    assert np.all(np.diff(prof.values) >= 0)
    assert np.all(prof.values <= prof.paper_upper() * 1.02)
    assert prof.correction >= 0
    assert len(list(prof.rows())) == len(prof.p_grid)


def test_sigma_inverse_examples():
    g = SigmaProfile.from_function(lambda p: sigma_closed_form(GAUSS, p), tails.DEFAULT_P_GRID)
    assert sigma_inverse(g, 1.0).p == pytest.approx(2.0, abs=1e-12)
    assert sigma_inverse(g, 0.5) == (1.0, False)
    lin = SigmaProfile.from_function(lambda p: p / 2, np.arange(1, 21))
    assert sigma_inverse(lin, 5.0).p == pytest.approx(10.0, abs=1e-12)
    assert sigma_inverse(lin, 50.0) == (20.0, True)


def test_sigma_inverse_rejects_bad_profiles():
    with pytest.raises(ValueError):
        SigmaProfile([], [], ())
    with pytest.raises(ValueError):
        sigma_inverse(SigmaProfile([1.0, 2.0], [2.0, 1.0], ("a", "a")), 1.5)


@given(st.floats(0.5, 12))
def test_sigma_inverse_is_generalised_inverse(u):
    lin = SigmaProfile.from_function(lambda p: p / 2, np.arange(1, 21))
    inv = sigma_inverse(lin, u)
    if not inv.saturated and u >= 0.5:
        assert inv.p / 2 >= u - 1e-9
        assert inv.p == pytest.approx(max(1.0, 2 * u), rel=1e-9)


def test_paouris_examples(stream):
    r = paouris_ratio(DistributionSpec("gaussian", 100), 2, 10**5, stream)
    assert r.ratio == pytest.approx(10 / 11, rel=0.03)
    for kind in KINDS:
        r = paouris_ratio(DistributionSpec(kind, 10), 1, 20000, stream.child(1))
        assert r.ratio <= 1.0 + 0.01


def test_clopper_pearson_matches_scipy():
    for hits, n in [(0, 10), (3, 10), (10, 10), (57, 1000), (1, 10**6)]:
        lo, hi = clopper_pearson(hits, n)
        ci = stats.binomtest(hits, n).proportion_ci(0.95, method="exact")
        assert float(lo) == pytest.approx(ci.low, abs=1e-10)
        assert float(hi) == pytest.approx(ci.high, abs=1e-10)


def test_curve_from_samples_counts():
    c = curve_from_samples([0.5, 1.0, 1.5, 2.0], [1.0, 2.0, 3.0], 1.0, "x")
    assert c.hits.tolist() == [3, 1, 0]
    assert c.censored.tolist() == [False, False, True]
    assert c.survival_text()[2] == "<1/4"
    with pytest.raises(ValueError):
        curve_from_samples([1.0], [2.0, 1.0], 1.0, "x")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=200), st.floats(0.1, 3))
def test_curve_invariants(samples, scale):
    c = curve_from_samples(samples, tails.DEFAULT_T_GRID, scale, "x")
    assert np.all(np.diff(c.survival) <= 0)
    assert np.all(c.ci_low <= c.survival + 1e-12)
    assert np.all(c.survival <= c.ci_high + 1e-12)


def test_projection_sup_full_rank_curve(stream):
    N = 6
    c = tail_curve(DistributionSpec("gaussian", N), Statistic.projection_sup(N), [0.1, 0.2, 0.3, 0.5, 1.0, 3.0],
                   2000, stream)
    assert c.survival[0] == 1.0 and c.survival[-1] == 0.0
    assert np.all(np.diff(c.survival) <= 0)
    assert c.thresholds[1] == pytest.approx(0.2 * math.sqrt(N))


def test_order_stat_laplace_exact_tail(stream):
    c = tail_curve(DistributionSpec("laplace_product", 1), Statistic.order_stat(1), [1.0, 2.0], 10**6, stream)
    np.testing.assert_allclose(c.survival, np.exp(-math.sqrt(2) * c.t_grid), rtol=0.02)


def test_gamma_curve_small(stream):
    st_ = Statistic.gamma_km(8, 2, 2)
    c = tail_curve(DistributionSpec("gaussian", 16), st_, [1.0, 2.0, 3.0], 500, stream)
    assert c.survival[-1] < 0.05
    assert "exact" in c.statistic


def test_statistic_validation():
    with pytest.raises(ValueError):
        Statistic.projection_sup(7).validate(6)
    with pytest.raises(ValueError):
        Statistic.order_stat(0).validate(6)
    with pytest.raises(ValueError):
        Statistic.gamma_km(4, 5, 1).validate(6)
    with pytest.raises(ValueError):
        Statistic.gamma_km(4, 2, 2, "heuristic", restarts=3).validate(6)
    with pytest.raises(ValueError):
        Statistic("median").validate(6)
    assert "lower_bound" in Statistic.gamma_km(40, 10, 10).describe(60)


def test_tail_curve_trial_floor(stream):
    with pytest.raises(ValueError):
        tail_curve(GAUSS, Statistic.order_stat(1), trials=99, stream=stream)


@pytest.mark.parametrize("stat", [Statistic.order_stat(2), Statistic.projection_sup(3), Statistic.gamma_km(5, 2, 2)])
def test_tail_curve_worker_invariance(stat, stream):
    spec = DistributionSpec("laplace", 8)
    a = tail_curve(spec, stat, trials=5000 if stat.kind != "gamma_km" else 200, stream=stream, workers=1)
    b = tail_curve(spec, stat, trials=5000 if stat.kind != "gamma_km" else 200, stream=stream, workers=8)
    np.testing.assert_array_equal(a.hits, b.hits)


def test_log_survival_slope_exact_exponential():
    t = np.linspace(1, 3, 9)
    trials = 10**6
    hits = np.round(trials * np.exp(-2 * t)).astype(int)
    c = TailCurve(t, t, hits, trials, "x")
    slope, lo, hi = log_survival_slope(c)
    assert slope == pytest.approx(-2, rel=1e-3)
    assert lo < -2 < hi and hi < 0


def test_log_survival_slope_too_few_points():
    c = TailCurve([1.0, 2.0], [1.0, 2.0], [5, 0], 100, "x")
    assert math.isnan(log_survival_slope(c)[0])


def test_log_survival_slope_ignores_saturated_points():
    # points with (almost) no misses carry no slope information on the log scale
    t = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
    c = TailCurve(t, t, [1000, 1000, 999, 900, 810], 1000, "x")
    slope, lo, hi = log_survival_slope(c)
    assert slope == pytest.approx(2 * math.log(0.9), rel=1e-9)
    assert hi < 0
