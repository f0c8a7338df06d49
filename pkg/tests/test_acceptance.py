"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one PASS/FAIL line (collected again in the terminal
summary) and then asserts the same condition.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from lcrip import metrics, tails, xp
from lcrip.bounds import BoundQuery, evaluate_bound, fit_constant
from lcrip.recovery import basis_pursuit_full, delta_m_ensemble, recovery_experiment
from lcrip.sampler import DistributionSpec, RandomStream, isotropic_scale, sample_vectors
from lcrip.selftest import run_selftest
from lcrip.tails import Statistic, log_survival_slope, paouris_ratio, sigma_estimate, tail_curve

KINDS = ("gaussian", "laplace_product", "uniform_cube_product", "uniform_ball", "uniform_l1_ball")
SEED = 31337


def _random_sparse_units(N, m, count, rng):
    supp = np.argsort(rng.random((count, N)), axis=1)[:, :m]
    X = np.zeros((count, N))
    np.put_along_axis(X, supp, rng.standard_normal((count, m)), axis=1)
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def test_c01_gamma_heuristic_vs_exact(report):
    t0 = time.perf_counter()
    root = RandomStream(SEED, (1,))
    total = matched = exceeded = 0
    for i in range(50):
        A = root.child(i).generator().standard_normal((8, 10))
        for k in (1, 2, 3):
            for m in (1, 2, 3):
                ex = metrics.gamma_km_exact(A, k, m).value
                h = metrics.gamma_km_heuristic(A, k, m, 20, root.child(i, k, m)).value
                total += 1
                exceeded += h > ex * (1 + 1e-12)
                matched += abs(h - ex) <= 1e-3 * ex
    dt = time.perf_counter() - t0
    ok = exceeded == 0 and matched >= 0.9 * total and dt < 60
    report("C1 Gamma heuristic <= exact, matches in >=90%", ok,
           f"matched {matched}/{total}, exceeded {exceeded}, {dt:.1f}s")
    assert ok


def test_c02_delta_vs_random_sparse(report):
    t0 = time.perf_counter()
    root = RandomStream(SEED, (2,))
    close = 0
    below = True
    for i in range(20):
        A = root.child(i).generator().standard_normal((6, 8)) / math.sqrt(6)
        d = metrics.delta_m_exact(A, 2).value
        X = _random_sparse_units(8, 2, 10**5, root.child(i, 1).generator())
        brute = float(np.max(np.abs(np.sum((X @ A.T) ** 2, axis=1) - 1.0)))
        below &= d >= brute - 1e-12
        close += d - brute <= 1e-3
    dt = time.perf_counter() - t0
    ok = below and close >= 19 and dt < 60
    report("C2 delta_2 exact >= random 2-sparse search, gap <= 1e-3 in >=95%", ok,
           f"close {close}/20, dominates {below}, {dt:.1f}s")
    assert ok


def test_c03_sigma_closed_form(report):
    root = RandomStream(SEED, (3,))
    g = DistributionSpec("gaussian", 10)
    worst = 0.0
    for p, target in ((2, 1.0), (4, 3 ** 0.25), (6, 15 ** (1 / 6))):
        est = sigma_estimate(g, p, 10**5, stream=root.child(p)).value
        worst = max(worst, abs(est / target - 1))
    lap = DistributionSpec("laplace_product", 10)
    X = sample_vectors(lap, 10**5, root.child(99))
    basis = float(np.mean(np.abs(X[:, 0]) ** 4) ** 0.25)
    lap_target = math.factorial(4) ** 0.25 / math.sqrt(2)
    lap_err = abs(basis / lap_target - 1)
    ok = worst <= 0.03 and lap_err <= 0.03
    report("C3 sigma closed form within 3%", ok, f"gaussian worst {worst:.4f}, laplace basis {lap_err:.4f}")
    assert ok


def test_c04_paouris_ratio(report):
    t0 = time.perf_counter()
    root = RandomStream(SEED, (4,))
    worst = (0.0, None)
    for i, kind in enumerate(KINDS):
        for N in (10, 100):
            for p in (1, 2, 4, 8):
                r = paouris_ratio(DistributionSpec(kind, N), p, 10**5, root.child(i, N, p)).ratio
                if r > worst[0]:
                    worst = (r, (kind, N, p))
    dt = time.perf_counter() - t0
    ok = worst[0] <= 4 and dt < 300
    report("C4 Paouris ratio <= 4", ok, f"max {worst[0]:.4f} at {worst[1]}, {dt:.1f}s")
    assert ok


def test_c05_projection_tail_shape(report):
    root = RandomStream(SEED, (5,))
    spec = DistributionSpec("laplace_product", 200)
    details, ok = [], True
    for m in (5, 20):
        c = tail_curve(spec, Statistic.projection_sup(m), tails.DEFAULT_T_GRID, 10**4, root.child(m))
        s = c.survival
        # strictly decreasing until censored
        shape = all(b < a or (a == 0 and b == 0) for a, b in zip(s, s[1:]))
        i1, i3 = int(np.argmin(abs(c.t_grid - 1))), int(np.argmin(abs(c.t_grid - 3)))
        drop = c.censored[i3] or s[i3] * 10 <= s[i1]
        fit = fit_constant(c, "thm3", {"m": m, "N": 200})
        ok &= bool(shape and drop and not fit.infinite and fit.C <= 10)
        details.append(f"m={m}: C={fit.C:.3g}, s(1)={s[i1]:.4g}, s(3)={c.survival_text()[i3]}")
    report("C5 projection-sup tail decreasing, fitted thm3 C <= 10", ok, "; ".join(details))
    assert ok


def test_c06_order_statistic_tail(report):
    root = RandomStream(SEED, (6,))
    spec = DistributionSpec("laplace_product", 1000)
    t = np.linspace(1, 3, 9)
    slopes = {}
    for ell in (1, 10):
        c = tail_curve(spec, Statistic.order_stat(ell), t, 10**5, root.child(ell))
        slopes[ell] = log_survival_slope(c, 1, 3)
    c1 = tail_curve(DistributionSpec("laplace_product", 1), Statistic.order_stat(1), [1.0, 2.0], 10**6,
                    root.child(0))
    exact = np.exp(-math.sqrt(2) * c1.t_grid)
    rel = float(np.max(np.abs(c1.survival / exact - 1)))
    slope_ok = {ell: bool(hi < 0) for ell, (_, _, hi) in slopes.items()}
    ok = all(slope_ok.values()) and rel <= 0.02
    detail = ", ".join(f"ell={ell}: slope {s:.4g} CI [{lo:.4g}, {hi:.4g}]" for ell, (s, lo, hi) in slopes.items())
    report("C6 order-statistic log-survival slope CI < 0; N=1 Laplace tail within 2%", ok,
           f"{detail}; N=1 rel err {rel:.4f}")
    assert ok


def test_c07_gamma_tail_grid(report):
    root = RandomStream(SEED, (7,))
    details, ok = [], True
    for kind in ("gaussian", "laplace_product"):
        spec = DistributionSpec(kind, 16)
        for k, m in ((1, 2), (2, 2), (2, 4)):
            st_ = Statistic.gamma_km(8, k, m, method="exact")
            vals = tails.statistic_samples(spec, st_, 500, root.child(len(kind), k, m))
            lam = metrics.lambda_threshold(k, m, 8, 16)
            tail = float(np.mean(vals >= 3 * lam))
            q90 = float(np.quantile(vals / lam, 0.9))
            curve = tails.curve_from_samples(vals, [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0], lam, st_.describe(16))
            fit = fit_constant(curve, "thm7", {"k": k, "m": m, "n": 8, "N": 16})
            ok &= tail <= 0.05 and q90 <= 3
            details.append(f"{kind[:5]} ({k},{m}): P={tail:.3f} q90={q90:.3f} C={fit.C:.3g}")
    report("C7 P(Gamma >= 3 lambda) <= 0.05 and q90(Gamma/lambda) <= 3", ok, "; ".join(details))
    assert ok


def test_c08_rip_scaling(report):
    t0 = time.perf_counter()
    root = RandomStream(SEED, (8,))
    spec_n = (64, 128, 256)
    admissible = [m for m in (1, 2, 3, 4)
                  if all(evaluate_bound(BoundQuery("thm8_lhs", {"m": m, "N": 4 * n, "n": n})).value <= 0.1 * n
                         for n in spec_n)]
    results = {}
    for m in admissible:
        meds = [delta_m_ensemble(DistributionSpec("gaussian", 4 * n), n, m, 20, "exact", root.child(m, n)).median
                for n in spec_n]
        results[m] = meds
    passing = [m for m, meds in results.items()
               if max(meds) <= 0.5 and all(b <= a for a, b in zip(meds, meds[1:]))]
    dt = time.perf_counter() - t0
    ok = bool(passing) and dt < 600
    detail = "; ".join(f"m={m}: medians " + ", ".join(f"{v:.3f}" for v in meds) for m, meds in results.items())
    report("C8 median delta_m(Gamma/sqrt n) <= 0.5 and non-increasing, N=4n", ok, f"{detail}; {dt:.1f}s")
    assert ok


def test_c09_recovery_phase(report):
    root = RandomStream(SEED, (9,))
    spec = DistributionSpec("gaussian", 256)
    ms = (5, 10, 20, 30, 40)
    res = [recovery_experiment(spec, 64, 256, m, 100, root.child(m)) for m in ms]
    rates = [r.success_rate for r in res]
    cis = [r.ci() for r in res]
    inversions = [i for i in range(len(ms) - 1) if rates[i + 1] > rates[i]]
    overlap = all(cis[i + 1][0] <= cis[i][1] for i in inversions)
    ok = rates[0] >= 0.95 and rates[-1] <= 0.05 and len(inversions) <= 1 and overlap
    report("C9 recovery >= 0.95 at m=5, <= 0.05 at m=40, monotone", ok,
           ", ".join(f"m={m}: {r:.2f}" for m, r in zip(ms, rates)))
    assert ok


DETERMINISM_CONFIGS = {
    "isotropy": "kind = isotropy\nspec.kind = l1ball\nspec.dimension = 10\ntrials = 20000\n",
    "sigma": "kind = sigma\nspec.kind = laplace\nspec.dimension = 10\ntrials = 20000\n",
    "paouris": "kind = paouris\nspec.kind = ball\nspec.dimension = 10\ntrials = 20000\n",
    "tails": "kind = tails\nspec.kind = laplace\nspec.dimension = 200\nsizes.m = 5\ntrials = 10000\n",
    "tails_order": ("kind = tails\nspec.kind = cube\nspec.dimension = 50\nsizes.ell = 3\ntrials = 5000\n"
                    "options.statistic = order_stat\noptions.sigma_trials = 5000\n"),
    "tails_gamma": ("kind = tails\nspec.kind = gaussian\nspec.dimension = 16\nsizes.n = 8\nsizes.k = 2\n"
                    "sizes.m = 2\ntrials = 200\noptions.statistic = gamma_km\n"),
    "gamma": ("kind = gamma\nspec.kind = laplace\nspec.dimension = 10\nsizes.n = 8\nsizes.k = 3\nsizes.m = 3\n"
              "trials = 5\noptions.method = heuristic\n"),
    "rip": "kind = rip\nspec.kind = gaussian\nspec.dimension = 64\nsizes.m = 2\noptions.n_list = [16, 32]\ntrials = 5\n",
    "recovery": ("kind = recovery\nspec.kind = gaussian\nspec.dimension = 64\nsizes.n = 24\n"
                 "options.m_list = [2, 6, 12]\ntrials = 20\n"),
    "bounds": ("kind = bounds\noptions.bound_id = thm5\nspec.kind = laplace\nspec.dimension = 50\nsizes.ell = 2\n"
               "sizes.N = 50\noptions.t = 9\noptions.sigma_trials = 5000\n"),
}


def test_c10_determinism(report, tmp_path):
    bad = []
    for name, text in DETERMINISM_CONFIGS.items():
        outputs = []
        for run_id, workers in enumerate((1, 1, 8)):
            cfg = xp.parse_config(text)
            cfg.workers = workers
            cfg.out = str(tmp_path / f"{name}-{run_id}")
            xp.run(cfg)
            outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / f"{name}-{run_id}").iterdir())})
        if not outputs[0] == outputs[1] == outputs[2]:
            bad.append(name)
    ok = not bad
    report("C10 byte-identical outputs across reruns and 1 vs 8 workers", ok,
           f"{len(DETERMINISM_CONFIGS)} experiments" + (f", differing: {bad}" if bad else ""))
    assert ok


def _derived_examples():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    svd = math.sqrt(max(np.roots(np.poly(A.T @ A)).real))
    s = RandomStream(SEED, (11,))
    L = math.log
    yield "operator_norm [[1,2],[3,4]]", abs(metrics.operator_norm(A) - svd) <= 1e-10 * svd
    X = _random_sparse_units(2, 2, 10**5, s.generator())
    D = np.diag([2.0, 1.0])
    rep = metrics.delta_m_exact(D, 2)
    brute = float(np.max(np.abs(np.sum((X @ D) ** 2, axis=1) - 1)))
    yield "delta_2(diag(2,1)) = 3 upper", rep.side == "upper" and abs(rep.value - brute) <= 1e-3
    yield "Gamma_12 = max row norm", abs(metrics.gamma_km_exact(A, 1, 2).value - max(np.linalg.norm(A, axis=1))) < 1e-12
    yield "Gamma_22 = operator norm", abs(metrics.gamma_km_exact(A, 2, 2).value - svd) <= 1e-10 * svd
    yield "Gamma_21 = max column norm", abs(metrics.gamma_km_exact(A, 2, 1).value - max(np.linalg.norm(A, axis=0))) < 1e-12
    yield "heuristic Gamma_12 restarts=5 = 5", abs(metrics.gamma_km_heuristic(A, 1, 2, 5, s).value - 5) < 1e-12
    yield "self_consistent_k(I_4) = 1", metrics.self_consistent_k(np.eye(4), 1, 1.0) == 1
    yield "self_consistent_k(2 I_4) = 4", metrics.self_consistent_k(2 * np.eye(4), 1, 1.0) == 4
    yield "k_prime(2,16,16) = 2", metrics.k_prime(2, 16, 16) == (2, False)
    yield "k_prime(4,8,16) saturated", metrics.k_prime(4, 8, 16) == (8, True)
    lam = math.sqrt(L(L(12))) * 2 * L(4 * math.e) + math.sqrt(2) * L(4 * math.e)
    yield "lambda(2,4,8,16) direct", abs(metrics.lambda_threshold(2, 4, 8, 16) - lam) < 1e-12
    yield "lambda(1,1,1,1) direct", abs(metrics.lambda_threshold(1, 1, 1, 1) - (math.sqrt(L(L(3))) + 1)) < 1e-12
    g = DistributionSpec("gaussian", 3)
    fourth = stats.norm.expect(lambda x: x**4)
    yield "sigma_closed_form gaussian p=4", abs(tails.sigma_closed_form(g, 4) - fourth**0.25) < 1e-9
    a = math.sqrt(3)
    diag = integrate.dblquad(lambda y, x: (x + y) ** 4, -a, a, -a, a)[0] / (2 * a) ** 2 / 4
    est = sigma_estimate(DistributionSpec("uniform_cube_product", 2), 4, 10**5, stream=s.child(1)).value
    yield "cube sigma(4) reaches the diagonal value", est >= 0.99 * diag**0.25
    yield "paouris gaussian N=100 p=2 ~ 10/11", abs(
        paouris_ratio(DistributionSpec("gaussian", 100), 2, 10**5, s.child(2)).ratio / (10 / 11) - 1) <= 0.03
    yield "paouris laplace N=10 p=10 <= 4", paouris_ratio(
        DistributionSpec("laplace_product", 10), 10, 10**6, s.child(3)).ratio <= 4
    yield "lemma1 example", abs(evaluate_bound(BoundQuery("lemma1", {"T": 1, "theta": 0.5, "B": 1, "n": 8})).value
                                - (1 - math.exp(-0.75))) < 1e-12
    cor6 = math.exp(-2 * L(4 * math.e) / math.sqrt(L(4 * math.e**2)))
    yield "cor6 example", abs(evaluate_bound(BoundQuery("cor6", {"t": 1, "m": 4, "N": 16, "b": 1})).value - cor6) < 1e-12
    thm8 = 10 * L(4) ** 2 * L(L(30))
    yield "thm8_lhs example", abs(evaluate_bound(BoundQuery("thm8_lhs", {"m": 10, "N": 1024, "n": 512})).value
                                  - thm8) < 1e-12
    r = basis_pursuit_full([[1.0, 1.0]], [1.0])
    yield "basis pursuit on x1 + x2 = 1", abs(r.l1 - 1) <= 1e-8
    yield "isotropic scales by quadrature", abs(
        isotropic_scale("uniform_ball", 3) ** 2
        * integrate.quad(lambda x: x * x * (1 - x * x), -1, 1)[0] / integrate.quad(lambda x: 1 - x * x, -1, 1)[0]
        - 1) < 1e-10
    e = delta_m_ensemble(DistributionSpec("gaussian", 4), 1000, 1, 20, stream=s.child(4))
    yield "delta ensemble n=1000 N=4 median <= 0.15", e.median <= 0.15


def test_c11_selftest_and_derived(report):
    failures = run_selftest(verbose=False)
    derived = list(_derived_examples())
    bad = [name for name, ok in derived if not ok]
    ok = failures == 0 and not bad
    report("C11 selftest and derived examples", ok,
           f"selftest failures {failures}, derived {len(derived) - len(bad)}/{len(derived)}"
           + (f", failing: {bad}" if bad else ""))
    assert ok
