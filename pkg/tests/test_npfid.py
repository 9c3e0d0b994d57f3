from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from confdist import npfid
from confdist.errors import (
    CapacityError,
    DataError,
    DomainError,
    FeasibilityError,
    InsufficientSampleError,
    ParameterError,
    ShapeError,
)
from confdist.npfid import SurvData, feasible, sample_ensemble
from confdist.numeric import RngStream


def _minimal_f_feasible(times, events, u):
    # the smallest nondecreasing F with F(y_i) >= u_i at failures is
    # F(t) = max{u_i : failure, y_i <= t}; any feasible F dominates it, so the
    # strict constraints hold for some F iff they hold for this one
    times, events, u = map(np.asarray, (times, events, u))

    def F(t, strict=False):
        m = (times < t) if strict else (times <= t)
        m = m & events
        return float(np.max(u[m])) if np.any(m) else 0.0

    for t, e, v in zip(times, events, u):
        if e and not F(t, strict=True) < v:
            return False
        if not e and not F(t) < v:
            return False
    return True


def _exp_data(g, n, cens_rate=0.0, rate=1.0):
    x = g.exponential(1 / rate, n)
    if cens_rate <= 0:
        return SurvData(x, np.ones(n, dtype=bool))
    c = g.exponential(1 / cens_rate, n)
    return SurvData(np.minimum(x, c), x <= c)


def _synthetic_n8(seed=4):
    g = np.random.default_rng(seed)
    x = 10 * g.weibull(2.0, 8)
    c = g.exponential(20.0, 8)
    return SurvData(np.minimum(x, c), x <= c)


# ---------------------------------------------------------------------------
# data validation

class TestSurvData:
    def test_requires_failure(self):
        with pytest.raises(DataError):
            SurvData([1.0, 2.0], [0, 0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            SurvData([1.0, 2.0], [1])

    @pytest.mark.parametrize("times", [[-1.0, 2.0], [math.inf, 1.0], [math.nan, 1.0]])
    def test_bad_times(self, times):
        with pytest.raises(ParameterError):
            SurvData(times, [1, 1])

    def test_bad_events(self):
        with pytest.raises(ParameterError):
            SurvData([1.0, 2.0], [1, 2])

    def test_empty(self):
        with pytest.raises(InsufficientSampleError):
            SurvData([], [])

    def test_tie_order_failure_first(self):
        d = SurvData([2.0, 2.0, 1.0], [False, True, True])
        ts, ev = d.sorted()
        assert list(ts) == [1.0, 2.0, 2.0]
        assert list(ev) == [True, True, False]


# ---------------------------------------------------------------------------
# feasibility and envelopes

class TestFeasible:
    def test_single_failure(self):
        d = SurvData([1.0], [1])
        assert all(feasible(d, [u]) for u in (0.01, 0.5, 0.99))

    def test_failures_out_of_order(self):
        assert not feasible(SurvData([1.0, 2.0], [1, 1]), [0.7, 0.3])
        assert feasible(SurvData([1.0, 2.0], [1, 1]), [0.3, 0.7])

    def test_censored_below_failure(self):
        assert not feasible(SurvData([1.0, 2.0], [1, 0]), [0.6, 0.4])
        assert feasible(SurvData([1.0, 2.0], [1, 0]), [0.4, 0.6])

    def test_input_order_irrelevant(self):
        assert not feasible(SurvData([2.0, 1.0], [1, 1]), [0.3, 0.7])

    def test_tied_failure_and_censored(self):
        # the failure counts first, so the censored value must exceed it
        d = SurvData([1.0, 1.0], [0, 1])
        assert not feasible(d, [0.3, 0.5])
        assert feasible(d, [0.6, 0.5])

    @pytest.mark.parametrize("u", [[0.0, 0.5], [0.5, 1.0], [1.2, 0.3]])
    def test_u_range(self, u):
        with pytest.raises(ParameterError):
            feasible(SurvData([1.0, 2.0], [1, 1]), u)

    def test_u_length(self):
        with pytest.raises(ShapeError):
            feasible(SurvData([1.0, 2.0], [1, 1]), [0.5])


@settings(max_examples=200, deadline=None)
@given(data=st.data(), n=st.integers(1, 7))
def test_feasible_matches_minimal_f(data, n):
    times = data.draw(st.lists(st.floats(0.1, 10), min_size=n, max_size=n, unique=True))
    events = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    assume(any(events))
    u = data.draw(st.lists(st.floats(0.01, 0.99), min_size=n, max_size=n))
    assert feasible(SurvData(times, events), u) == _minimal_f_feasible(times, events, u)


class TestEnvelopes:
    def test_single_failure(self):
        lower, upper = npfid.envelopes(SurvData([1.0], [1]), [0.4])
        assert upper(0.5) == pytest.approx(1.0)
        assert upper(1.0) == pytest.approx(0.6)
        assert upper(3.0) == pytest.approx(0.6)
        assert lower(0.5) == pytest.approx(0.6)
        assert lower(1.0) == pytest.approx(0.0)
        assert lower(3.0) == pytest.approx(0.0)

    def test_censored_caps_lower_envelope(self):
        # F(2) < 0.8 from the censored point; beyond 2 nothing bounds F
        lower, upper = npfid.envelopes(SurvData([1.0, 2.0], [1, 0]), [0.3, 0.8])
        assert lower(1.5) == pytest.approx(0.2)
        assert lower(2.0) == pytest.approx(0.2)
        assert lower(2.5) == pytest.approx(0.0)
        assert upper(2.5) == pytest.approx(0.7)

    def test_all_failures_bracket_order_statistics(self):
        t = np.array([1.0, 2.0, 3.0, 4.0])
        u = np.array([0.1, 0.35, 0.6, 0.9])
        lower, upper = npfid.envelopes(SurvData(t, [1, 1, 1, 1]), u)
        grid = np.linspace(0, 5, 501)
        # the step curve through the u order statistics sits between the envelopes
        step = 1 - np.concatenate([[0.0], u])[np.searchsorted(t, grid, side="right")]
        assert np.all(lower(grid) <= step + 1e-15)
        assert np.all(step <= upper(grid) + 1e-15)

    def test_infeasible(self):
        with pytest.raises(FeasibilityError):
            npfid.envelopes(SurvData([1.0, 2.0], [1, 1]), [0.7, 0.3])


# ---------------------------------------------------------------------------
# ensembles

class TestEnsemble:
    def test_no_censoring_equal_weights(self):
        ens = sample_ensemble(_exp_data(np.random.default_rng(0), 10), 200, RngStream(1))
        assert np.allclose(ens.weights, 1 / 200)

    def test_weights_normalized(self):
        ens = sample_ensemble(_synthetic_n8(), 500, RngStream(2))
        assert ens.weights.sum() == pytest.approx(1.0)
        assert np.all(ens.weights >= 0)
        assert 0 < ens.ess <= 500

    def test_draws_are_feasible(self):
        d = _synthetic_n8()
        for sampler in ("importance", "rejection"):
            ens = sample_ensemble(d, 300, RngStream(3), sampler)
            _, ev = d.sorted()
            assert np.all(npfid._feasible_sorted(ev, ens.u))
            c = ens.curve(5)
            assert feasible(d, c.u_draw)

    def test_minimum_size(self):
        with pytest.raises(InsufficientSampleError):
            sample_ensemble(_synthetic_n8(), 99, RngStream(0))

    def test_bad_options(self):
        with pytest.raises(ParameterError):
            sample_ensemble(_synthetic_n8(), 100, RngStream(0), sampler="gibbs")
        with pytest.raises(ParameterError):
            sample_ensemble(_synthetic_n8(), 100, RngStream(0), interp="spline")

    def test_rejection_capacity(self):
        d = SurvData(np.arange(1.0, 16.0), np.ones(15, dtype=bool))
        with pytest.raises(CapacityError, match="importance"):
            sample_ensemble(d, 100, RngStream(0), "rejection")

    @pytest.mark.parametrize("times, events, expected", [
        ([1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1], 1 / 24),
        ([1.0, 2.0], [1, 0], 0.5),
        ([1.0, 2.0, 3.0], [0, 1, 0], 0.5),
    ])
    def test_acceptance_probability(self, times, events, expected):
        p = npfid.acceptance_probability(SurvData(times, events), draws=200_000, rng=RngStream(1))
        assert p == pytest.approx(expected, rel=0.01)

    def test_acceptance_matches_rejection_rate(self):
        d = _synthetic_n8()
        _, ev = d.sorted()
        u = RngStream(5).generator().random((400_000, d.n))
        empirical = float(np.mean(npfid._feasible_sorted(ev, u)))
        assert npfid.acceptance_probability(d, 100_000, RngStream(6)) == pytest.approx(empirical, rel=0.1)

    def test_resample_equal_weights(self):
        ens = sample_ensemble(_synthetic_n8(), 400, RngStream(7)).resample(RngStream(8))
        assert np.allclose(ens.weights, 1 / 400)

    def test_seeded_reproducible(self):
        d = _synthetic_n8()
        a = sample_ensemble(d, 200, RngStream(9))
        b = sample_ensemble(d, 200, RngStream(9))
        assert np.array_equal(a.u, b.u) and np.array_equal(a.knot_values, b.knot_values)


@pytest.mark.parametrize("interp", ["log_linear", "midpoint"])
def test_curves_between_envelopes_and_monotone(interp):
    d = _synthetic_n8()
    ens = sample_ensemble(d, 500, RngStream(11), interp=interp)
    grid = np.unique(np.concatenate([np.linspace(0, d.times.max() * 1.2, 400), d.times]))
    SL, SU = ens.envelopes_on(grid)
    SI = ens.interp_on(grid)
    assert np.all(SL <= SI + 1e-12) and np.all(SI <= SU + 1e-12)
    for S in (SL, SI, SU):
        assert np.all(np.diff(S, axis=1) <= 1e-12)
        assert np.all((S >= 0) & (S <= 1))


def test_right_continuity():
    d = _synthetic_n8()
    ens = sample_ensemble(d, 200, RngStream(12))
    eps = 1e-9
    SL, SU = ens.envelopes_on(d.times)
    SL2, SU2 = ens.envelopes_on(d.times + eps)
    assert np.array_equal(SU, SU2)
    # at a censored time S^L keeps the bound F(y_j) < u_j, so only failures are checked
    assert np.array_equal(SL[:, d.events], SL2[:, d.events])
    assert np.allclose(ens.interp_on(d.times), ens.interp_on(d.times + eps), atol=1e-7)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000))
def test_permutation_invariance(seed):
    g = np.random.default_rng(seed)
    d = _exp_data(g, 9, cens_rate=0.5)
    perm = g.permutation(d.n)
    dp = SurvData(d.times[perm], d.events[perm])
    a = sample_ensemble(d, 200, RngStream(seed))
    b = sample_ensemble(dp, 200, RngStream(seed))
    grid = np.linspace(0, d.times.max(), 50)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.interp_on(grid), b.interp_on(grid))


def test_samplers_agree_ks():
    d = _synthetic_n8()
    imp = sample_ensemble(d, 10_000, RngStream(1), "importance").resample(RngStream(3))
    rej = sample_ensemble(d, 10_000, RngStream(2), "rejection")
    times = np.quantile(d.times, [0.1, 0.3, 0.5, 0.7, 0.9])
    a, b = imp.interp_on(times), rej.interp_on(times)
    for k in range(times.size):
        assert stats.ks_2samp(a[:, k], b[:, k]).statistic < 0.03


# ---------------------------------------------------------------------------
# pointwise intervals

class TestPointwise:
    def test_identical_curves_zero_width(self):
        d = SurvData([1.0, 2.0, 3.0], [1, 1, 1])
        base = sample_ensemble(d, 100, RngStream(0))
        M = base.M
        same = npfid.FidEnsemble(d, np.repeat(base.u[:1], M, 0), np.full(M, 1 / M), base.knot_times,
                                 np.repeat(base.knot_values[:1], M, 0))
        ci = npfid.pointwise_ci(same, 1.5)
        assert ci.length == 0.0

    def test_bounds(self):
        ens = sample_ensemble(_synthetic_n8(), 500, RngStream(1))
        for t in (0.0, 3.0, 8.0, 30.0):
            ci = npfid.pointwise_ci(ens, t)
            assert 0.0 <= ci.lower <= ci.upper <= 1.0

    def test_errors(self):
        ens = sample_ensemble(_synthetic_n8(), 100, RngStream(1))
        with pytest.raises(ParameterError):
            npfid.pointwise_ci(ens, 1.0, 1.0)
        with pytest.raises(DomainError):
            npfid.pointwise_ci(ens, -1.0)

    def test_weighted_quantile(self):
        assert npfid.weighted_quantile([3, 1, 2], [1, 1, 1], 0.5) == 2
        assert npfid.weighted_quantile([1, 2], [0.9, 0.1], 0.5) == 1

    def test_coverage_exp1_at_median(self):
        t, base, hits, reps = math.log(2), RngStream(21), 0, 400
        for i in range(reps):
            d = _exp_data(base.child(i).child(0).generator(), 50)
            ens = sample_ensemble(d, 1000, base.child(i).child(1))
            hits += npfid.pointwise_ci(ens, t).contains(0.5)
        # three binomial standard errors around 0.95
        assert abs(hits / reps - 0.95) <= 3 * math.sqrt(0.95 * 0.05 / reps)


# ---------------------------------------------------------------------------
# two-sample test

class TestTwoSample:
    def test_non_overlapping(self):
        with pytest.raises(DomainError):
            npfid.two_sample_test(SurvData([1.0, 2.0], [1, 1]), SurvData([3.0, 4.0], [1, 1]), 100, RngStream(0))

    def test_identical_samples(self):
        d = _exp_data(np.random.default_rng(5), 40, cens_rate=0.3)
        r = npfid.two_sample_test(d, d, 1000, RngStream(6))
        assert r.p_value > 0.1

    def test_result_fields(self):
        d = _exp_data(np.random.default_rng(5), 20)
        r = npfid.two_sample_test(d, d, 200, RngStream(6))
        out = r.as_dict()
        assert set(out) == {"p_value", "statistic", "band_halfwidth_95", "M", "grid_points"}
        assert 0 <= r.p_value <= 1

    def test_seeded_reproducible(self):
        g = np.random.default_rng(3)
        a, b = _exp_data(g, 20), _exp_data(g, 20)
        assert npfid.two_sample_test(a, b, 300, RngStream(4)).p_value == \
            npfid.two_sample_test(a, b, 300, RngStream(4)).p_value

    def test_power_exp1_vs_exp2(self):
        base, reps, rej = RngStream(45), 100, 0
        for i in range(reps):
            g = base.child(i).child(0).generator()
            a, b = _exp_data(g, 45, rate=1.0), _exp_data(g, 45, rate=2.0)
            rej += npfid.two_sample_test(a, b, 1000, base.child(i).child(1)).p_value < 0.05
        assert rej / reps >= 0.80


def test_ensemble_csv():
    ens = sample_ensemble(SurvData([1.0, 2.0, 3.0], [1, 0, 1]), 100, RngStream(0))
    text = npfid.ensemble_to_csv(ens, [0.5, 2.5], {"seed": 0})
    lines = text.splitlines()
    assert lines[0] == "# seed: 0"
    assert lines[1] == "draw_id,t,S_L,S_I,S_U,weight"
    assert len(lines) == 2 + 100 * 2
