"""Acceptance suite: one test (or a few parts) per criterion, at the stated tolerances.

Run ``pytest tests/test_acceptance.py`` (or this file directly); the terminal
summary prints one pass/fail line per criterion.
"""

from __future__ import annotations

import contextlib
import functools
import itertools
import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from confdist import cdcore, construct, covlab, datasets, fusion, gfd, npfid
from confdist.numeric import RngStream

CRITERIA = {
    1: "exactness suite (KS uniformity of H(theta0))",
    2: "four-study correlation coverage",
    3: "binomial upper/lower dominance",
    4: "regression GFD equals t-CD",
    5: "irregular uniform coverage",
    6: "binomial half-corrected CD equals Beta-mixture GFD",
    7: "censored-data sampler equivalence and feasibility oracle",
    8: "gastric two-sample test and size",
    9: "Lawless survival band sanity",
    10: "combination algebra",
}

# criterion -> list of (part, ok, detail)
RESULTS: dict = {}


@contextlib.contextmanager
def criterion(num: int, part: str):
    info = {"detail": ""}
    try:
        yield info
    except BaseException as exc:
        RESULTS.setdefault(num, []).append((part, False, info["detail"] or type(exc).__name__))
        raise
    RESULTS.setdefault(num, []).append((part, True, info["detail"]))


def summary_lines() -> list:
    lines = []
    for num, name in CRITERIA.items():
        parts = RESULTS.get(num)
        if not parts:
            lines.append(f"criterion {num:2d} NOT RUN  {name}")
            continue
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{p[0]}: {'ok' if p[1] else 'FAIL'}{' (' + p[2] + ')' if p[2] else ''}"
                           for p in parts)
        lines.append(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {name} | {detail}")
    return lines


# ---------------------------------------------------------------------------
# 1. exactness: H(theta0) ~ U(0, 1), 1e4 replications, KS p > 0.01, < 2 min each

def _exp2_gen(g, mu0, n=10, sigma=2.0):
    return mu0 + g.exponential(sigma, n)


EXACT_CASES = {
    "normal_mean": (lambda x: construct.normal_mean_cd(float(np.mean(x)), x.size, 1.5),
                    lambda g, th: g.normal(th, 1.5, 10), 0.5),
    "t_mean": (construct.t_mean_cd, lambda g, th: g.normal(th, 2.0, 10), -1.0),
    "variance": (construct.variance_cd, lambda g, th: g.normal(3.0, math.sqrt(th), 10), 4.0),
    "exp2_location": (lambda x: construct.exp2_cds(construct.exp2_fit(x, 6))[0], _exp2_gen, 1.0),
    "exp2_scale": (lambda x: construct.exp2_cds(construct.exp2_fit(x, 6))[1],
                   lambda g, th: 1.0 + g.exponential(th, 10), 2.0),
}


@pytest.mark.parametrize("case", list(EXACT_CASES))
def test_c1_exactness(case):
    builder, gen, theta0 = EXACT_CASES[case]
    with criterion(1, case) as info:
        t0 = time.perf_counter()
        res = covlab.uniformity_test(builder, gen, theta0, 10_000, RngStream(101))
        dt = time.perf_counter() - t0
        info["detail"] = f"KS p={res.p_value:.3f}, {dt:.0f}s"
        assert res.p_value > 0.01
        assert dt < 120


# ---------------------------------------------------------------------------
# 2. four simulated correlation studies, 200 reps

def test_c2_four_study_pipeline():
    with criterion(2, "200 reps") as info:
        t0 = time.perf_counter()
        r = covlab.table2_pipeline(200, RngStream(2024))
        dt = time.perf_counter() - t0
        cov = r.combined.empirical_coverage[0]
        length = r.combined.mean_length[0]
        fz = r.fisher_z.empirical_coverage[0]
        info["detail"] = f"combined cov={cov:.3f} len={length:.4f}, Fisher-z cov={fz:.3f}, {dt:.0f}s"
        assert 0.91 <= cov <= 0.99
        assert 0.176 <= length <= 0.276
        assert 0.90 <= fz <= 0.99
        assert dt < 300


# ---------------------------------------------------------------------------
# 3. binomial upper/lower CDs bracket the uniform

@pytest.mark.parametrize("p0", [0.1, 0.5, 0.9])
def test_c3_binomial_dominance(p0):
    with criterion(3, f"p0={p0}") as info:
        t = np.linspace(0.01, 0.99, 99)
        out = {}
        for kind in ("upper", "lower"):
            out[kind] = cdcore.stochastic_dominance_check(
                lambda x, kind=kind: construct.binomial_cd(int(x), 10, kind),
                lambda g: g.binomial(10, p0), p0, 10_000, RngStream(3), t_grid=t)
        short = out["upper"].max_shortfall
        excess = out["lower"].max_excess
        info["detail"] = f"upper max(t-P)={short:.4f}, lower max(P-t)={excess:.4f}"
        assert np.all(out["upper"].p_hat >= t - 0.02)
        assert np.all(out["lower"].p_hat <= t + 0.02)


# ---------------------------------------------------------------------------
# 4. intercept-only regression GFD reproduces the t-CD

def test_c4_regression_equals_t():
    y = np.random.default_rng(2).normal(3.0, 2.0, 20)
    with criterion(4, "M=1e5") as info:
        draws = gfd.gfd_linear_regression(np.ones((20, 1)), y, M=100_000, rng=RngStream(5))
        tcd = construct.t_mean_cd(y)
        ks = stats.kstest(draws.beta[:, 0], tcd.eval).statistic
        n, xbar, s = y.size, y.mean(), y.std(ddof=1)
        half = stats.t.ppf(0.975, n - 1) * s / math.sqrt(n)
        lo, hi = draws.interval(0, 0.95)
        err = max(abs(lo - (xbar - half)), abs(hi - (xbar + half)))
        info["detail"] = f"KS={ks:.4f}, endpoint error={err:.1e}"
        assert ks < 0.02
        assert err < 1e-3


# ---------------------------------------------------------------------------
# 5. U(theta, theta^2): fiducial r1 coverage and the flat-prior control

U_THETAS = (2.0, 5.0, 10.0)
U_NS = (1, 5, 10)


def _u_coverage(build, seed):
    cov = {}
    for th, n in itertools.product(U_THETAS, U_NS):
        rep = covlab.coverage_experiment(
            lambda y: gfd.density_to_cd(build(y)),
            lambda g, th, n=n: th + (th * th - th) * g.random(n),
            th, (0.95,), 1000, RngStream(seed))
        cov[(th, n)] = rep.empirical_coverage[0]
    return cov


def test_c5_u_theta_fiducial_coverage():
    model = gfd.u_theta_model()
    with criterion(5, "r1 coverage >= 0.93") as info:
        cov = _u_coverage(lambda y: gfd.gfd_uniform_irregular(model, y, "r1"), 55)
        info["detail"] = f"min cell {min(cov.values()):.3f}"
        assert min(cov.values()) >= 0.93


def test_c5_flat_prior_negative_control():
    with criterion(5, "flat-prior cell < 0.90") as info:
        cov = _u_coverage(lambda y: gfd.bayes_u_theta(y, "flat"), 55)
        worst = min(cov, key=cov.get)
        info["detail"] = f"min cell {cov[worst]:.3f} at theta={worst[0]:g}, n={worst[1]}"
        assert min(cov.values()) < 0.90


# ---------------------------------------------------------------------------
# 6. binomial half-corrected CD equals the Beta-mixture GFD

def test_c6_discrete_identity():
    p = np.linspace(0.001, 0.999, 999)
    with criterion(6, "n <= 20, all x") as info:
        worst = 0.0
        for n in range(1, 21):
            for x in range(n + 1):
                a = construct.binomial_cd(x, n, "half").eval(p)
                b = gfd.gfd_discrete("binomial", x, m=n).eval(p)
                worst = max(worst, float(np.max(np.abs(a - b))))
        info["detail"] = f"max diff {worst:.1e}"
        assert worst < 1e-10


# ---------------------------------------------------------------------------
# 7. importance vs rejection sampler; brute-force feasibility for n <= 4

def _synthetic_censored():
    g = np.random.default_rng(4)
    x = g.weibull(2.0, 8) * 10.0
    c = g.exponential(20.0, 8)
    return npfid.SurvData(np.minimum(x, c), x <= c)


def test_c7_sampler_equivalence():
    data = _synthetic_censored()
    with criterion(7, "importance vs rejection") as info:
        ei = npfid.sample_ensemble(data, 10_000, RngStream(1), "importance")
        er = npfid.sample_ensemble(data, 10_000, RngStream(2), "rejection")
        grid = np.quantile(data.times, [0.2, 0.35, 0.5, 0.65, 0.8])
        si, sr = ei.interp_on(grid), er.interp_on(grid)
        worst = 0.0
        for j in range(grid.size):
            qi = npfid.weighted_quantile(si[:, j], ei.weights, [0.1, 0.5, 0.9])
            qr = np.quantile(sr[:, j], [0.1, 0.5, 0.9], method="inverted_cdf")
            worst = max(worst, float(np.max(np.abs(qi - qr))))
        info["detail"] = f"max quantile gap {worst:.4f}"
        assert worst < 0.03


@functools.lru_cache(maxsize=None)
def _step_values(n, G):
    seqs = np.array(list(itertools.combinations_with_replacement(np.arange(G + 1) / G, n)))
    return seqs, np.hstack([np.zeros((seqs.shape[0], 1)), seqs[:, :-1]])


def _monotone_f_exists(events, u, G):
    """Brute force: is there a nondecreasing F on the grid ``levels`` meeting every constraint?

    With distinct times it suffices to search step functions jumping at the
    observation times; ``seqs`` enumerates all of them on the grid ``k/G``.
    """
    seqs, prev = _step_values(len(events), G)
    ok = np.ones(seqs.shape[0], dtype=bool)
    for i, e in enumerate(events):
        if e:
            ok &= (seqs[:, i] >= u[i]) & (prev[:, i] < u[i])
        else:
            ok &= seqs[:, i] < u[i]
    return bool(ok.any())


def test_c7_feasibility_oracle():
    # u on half-grid points; nearest-grid rounding of any real F keeps every constraint
    G = 8
    us = (np.arange(G) + 0.5) / G
    with criterion(7, "feasibility oracle n <= 4") as info:
        checked = 0
        for n in range(1, 5):
            times = np.arange(1.0, n + 1.0)
            for events in itertools.product([True, False], repeat=n):
                if not any(events):
                    continue
                data = npfid.SurvData(times, np.array(events))
                for u in itertools.product(us, repeat=n):
                    assert npfid.feasible(data, np.array(u)) == _monotone_f_exists(events, u, G), (events, u)
                    checked += 1
        info["detail"] = f"{checked} (pattern, u) cases"


# ---------------------------------------------------------------------------
# 8. gastric data and size under equal distributions

def test_c8_gastric():
    a = npfid.SurvData(*datasets.gastric_combination())
    b = npfid.SurvData(*datasets.gastric_chemotherapy())
    with criterion(8, "gastric p <= 0.01") as info:
        r = npfid.two_sample_test(a, b, 5000, RngStream(7))
        info["detail"] = f"p={r.p_value:.4f}"
        assert r.p_value <= 0.01


def test_c8_size():
    def sim(g, n):
        x = g.exponential(1.0, n)
        c = g.exponential(1 / 0.3, n)
        return npfid.SurvData(np.minimum(x, c), x <= c)

    with criterion(8, "size in [0.02, 0.09]") as info:
        t0 = time.perf_counter()
        base = RngStream(88)
        rej = 0
        for i in range(200):
            rep = base.child(i)
            g = rep.child(0).generator()
            r = npfid.two_sample_test(sim(g, 30), sim(g, 30), 1000, rep.child(1))
            rej += r.p_value < 0.05
        dt = time.perf_counter() - t0
        info["detail"] = f"rate={rej / 200:.3f}, {dt:.0f}s"
        assert 0.02 <= rej / 200 <= 0.09
        assert dt < 600


# ---------------------------------------------------------------------------
# 9. Lawless lower band

def test_c9_lawless_band():
    x = datasets.lawless()
    with criterion(9, "M=1000") as info:
        fit = construct.exp2_fit(x)
        draws = construct.exp2_joint_draws(fit, 1000, RngStream(9))
        t = np.linspace(150.0, 2000.0, 400)
        band = construct.exp2_survival_band(draws, t, 0.95, "lower")
        plug = construct.exp2_survival(t, fit.mu_hat, fit.sigma_hat)
        info["detail"] = f"max(lower - plug-in)={np.max(band.lower - plug):.3f}"
        assert np.all(np.diff(band.lower) <= 0)
        assert np.all(band.lower <= plug)


# ---------------------------------------------------------------------------
# 10. combination algebra

def test_c10_sqrt_n_pooling():
    with criterion(10, "sqrt(n) pooling") as info:
        x1, n1, x2, n2 = 1.3, 12, 0.4, 30
        cds = [construct.normal_mean_cd(x1, n1), construct.normal_mean_cd(x2, n2)]
        grid = np.linspace(-1.0, 2.5, 2001)
        comb = fusion.combine(cds, fusion.CombinerSpec("quantile", weights=fusion.sqrt_n_weights([n1, n2])), grid)
        pooled = stats.norm.cdf(math.sqrt(n1 + n2) * (grid - (n1 * x1 + n2 * x2) / (n1 + n2)))
        err = float(np.max(np.abs(comb.eval(grid) - pooled)))
        info["detail"] = f"sup error {err:.1e}"
        assert err < 1e-6


def test_c10_identity():
    with criterion(10, "k=1 identity") as info:
        cd = construct.t_mean_cd_from_stats(0.3, 1.7, 9)
        grid = np.linspace(-2.0, 2.5, 1001)
        worst = 0.0
        for rule in fusion.RULES:
            comb = fusion.combine([cd], fusion.CombinerSpec(rule), grid)
            worst = max(worst, float(np.max(np.abs(comb.eval(grid) - cd.eval(grid)))))
        info["detail"] = f"sup error {worst:.1e} over all rules"
        assert worst < 1e-9


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
