"""Nonparametric fiducial inference for right-censored survival data.

Each observation carries a uniform ``u_i`` through the data generating
equation. A vector ``u`` is feasible when some distribution function ``F``
satisfies ``F(y_i-) < u_i <= F(y_i)`` at every failure and ``F(y_j) < u_j`` at
every censored time. Feasible draws define lower/upper envelopes of the
survival function and an interpolated curve between them.

Observations are put in a total order by ``(time, failure first, input
index)``; ties are thereby broken deterministically.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cdcore import CInterval
from .errors import (
    CapacityError,
    DataError,
    DomainError,
    FeasibilityError,
    InsufficientSampleError,
    NumericalError,
    ParameterError,
    ShapeError,
)
from .numeric import RngLike, as_generator

MIN_ENSEMBLE = 100
MIN_ACCEPTANCE = 1e-6
_REJECTION_BATCH = 200_000


@dataclass(frozen=True, eq=False)
class SurvData:
    """Right-censored sample: ``times`` with ``events`` (True = failure)."""

    times: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        e = np.asarray(self.events).ravel()
        if t.shape != e.shape:
            raise ShapeError("times and events must have the same length")
        if t.size == 0:
            raise InsufficientSampleError("no observations")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ParameterError("times must be finite and nonnegative")
        if e.dtype != bool:
            if not np.all(np.isin(e, (0, 1))):
                raise ParameterError("events must be 0/1 or boolean")
            e = e.astype(bool)
        if not np.any(e):
            raise DataError("need at least one failure")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def order(self) -> np.ndarray:
        """Permutation sorting by (time, failure before censored, index)."""
        return np.lexsort((np.arange(self.n), ~self.events, self.times))

    def sorted(self):
        o = self.order
        return self.times[o], self.events[o]


# ---------------------------------------------------------------------------
# feasibility and envelopes (u given in input order)

def _sorted_u(data: SurvData, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != data.n:
        raise ShapeError(f"expected {data.n} uniforms, got {u.shape[-1]}")
    return u[..., data.order]


def _feasible_sorted(ev: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Vectorized feasibility for rows of ``us`` already in sorted observation order."""
    fail_u = np.where(ev, us, -np.inf)
    runmax = np.maximum.accumulate(fail_u, axis=-1)
    prev_max = np.concatenate([np.full(us.shape[:-1] + (1,), -np.inf), runmax[..., :-1]], axis=-1)
    # (a) each failure exceeds every earlier failure
    ok_fail = np.all(np.where(ev, us > prev_max, True), axis=-1)
    # (b) each censored value exceeds every failure at or before its time
    ok_cens = np.all(np.where(ev, True, us > runmax), axis=-1)
    return ok_fail & ok_cens


def feasible(data: SurvData, u) -> bool:
    """Whether some nondecreasing ``F`` meets every constraint implied by ``u``."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ParameterError("u must lie in (0, 1)")
    _, ev = data.sorted()
    return bool(_feasible_sorted(ev, _sorted_u(data, u)))


def _envelope_arrays(ts, ev, us, grid):
    """(F^L, F^U) on ``grid`` for each row of sorted uniforms ``us``."""
    fail_u = np.where(ev, us, 0.0)
    runmax = np.maximum.accumulate(fail_u, axis=-1)
    n = ts.size
    big = np.inf
    fail_only = np.where(ev, us, big)
    cens_only = np.where(ev, big, us)
    pad = np.full(us.shape[:-1] + (1,), big)
    suf_fail = np.concatenate([np.minimum.accumulate(fail_only[..., ::-1], axis=-1)[..., ::-1], pad], axis=-1)
    suf_cens = np.concatenate([np.minimum.accumulate(cens_only[..., ::-1], axis=-1)[..., ::-1], pad], axis=-1)
    g = np.asarray(grid, dtype=float)
    k_le = np.searchsorted(ts, g, side="right")  # observations with y <= t
    k_lt = np.searchsorted(ts, g, side="left")   # observations with y < t
    FL = np.where(k_le == 0, 0.0, runmax[..., np.clip(k_le - 1, 0, n - 1)])
    # failures with y > t, censored with y >= t
    FU = np.minimum(np.minimum(suf_fail[..., k_le], suf_cens[..., k_lt]), 1.0)
    return FL, FU


def envelopes(data: SurvData, u):
    """Upper and lower survival envelopes ``(S^L, S^U)`` for one feasible ``u``.

    ``S^U = 1 - F^L`` with ``F^L(t) = max{u_i : failure, y_i <= t}`` and
    ``S^L = 1 - F^U`` with ``F^U(t) = min({u_i : failure, y_i > t} U
    {u_j : censored, y_j >= t} U {1})``. ``S^L`` takes its left-limit value at
    censored times, where the bound ``F(y_j) < u_j`` still applies.
    """
    u = np.asarray(u, dtype=float)
    if not feasible(data, u):
        raise FeasibilityError("u is not feasible for these data")
    ts, ev = data.sorted()
    us = _sorted_u(data, u)

    def lower(t):
        out = 1.0 - _envelope_arrays(ts, ev, us, np.atleast_1d(t))[1]
        return float(out[0]) if np.ndim(t) == 0 else out

    def upper(t):
        out = 1.0 - _envelope_arrays(ts, ev, us, np.atleast_1d(t))[0]
        return float(out[0]) if np.ndim(t) == 0 else out

    return lower, upper


# ---------------------------------------------------------------------------
# ensembles

@dataclass
class FidCurve:
    """One fiducial draw: envelopes, interpolated curve and the uniforms behind them."""

    lower_surv: Callable
    upper_surv: Callable
    interp_surv: Callable
    u_draw: np.ndarray


@dataclass
class FidEnsemble:
    """``M`` fiducial draws with normalized weights.

    ``u`` holds the draws in sorted observation order. ``knot_values`` are
    the interpolated curve's values at ``knot_times`` (log-linear scheme) and
    ``interp`` names the scheme.
    """

    data: SurvData
    u: np.ndarray
    weights: np.ndarray
    knot_times: np.ndarray
    knot_values: np.ndarray
    interp: str = "log_linear"
    sampler: str = "importance"

    @property
    def M(self) -> int:
        return self.u.shape[0]

    def envelopes_on(self, grid):
        """``(S^L, S^U)`` arrays of shape ``(M, len(grid))``."""
        ts, ev = self.data.sorted()
        FL, FU = _envelope_arrays(ts, ev, self.u, grid)
        return 1.0 - FU, 1.0 - FL

    def interp_on(self, grid) -> np.ndarray:
        """Interpolated curves ``S^I`` on ``grid``, shape ``(M, len(grid))``."""
        g = np.asarray(grid, dtype=float)
        if self.interp == "midpoint":
            SL, SU = self.envelopes_on(g)
            return 0.5 * (SL + SU)
        kt, kv = self.knot_times, self.knot_values
        idx = np.searchsorted(kt, g, side="right")  # knots at or before t
        out = np.empty((self.M, g.size))
        before = idx == 0
        after = idx >= kt.size
        mid = ~before & ~after
        out[:, before] = 1.0
        out[:, after] = kv[:, -1:]
        if np.any(mid):
            i0 = idx[mid] - 1
            t0, t1 = kt[i0], kt[i0 + 1]
            frac = (g[mid] - t0) / (t1 - t0)
            with np.errstate(divide="ignore", invalid="ignore"):
                l0, l1 = np.log(kv[:, i0]), np.log(kv[:, i0 + 1])
                val = np.exp(l0 + frac * (l1 - l0))
            # a zero endpoint gives log -inf; the curve is then 0 beyond t0 only at the knot
            out[:, mid] = np.where(np.isfinite(val), val, np.where(frac > 0, kv[:, i0 + 1], kv[:, i0]))
        return out

    def curve(self, j: int) -> FidCurve:
        inv = np.argsort(self.data.order)
        sl = lambda t: self.envelopes_on(np.atleast_1d(t))[0][j]
        su = lambda t: self.envelopes_on(np.atleast_1d(t))[1][j]
        si = lambda t: self.interp_on(np.atleast_1d(t))[j]
        return FidCurve(sl, su, si, self.u[j][inv])

    def resample(self, rng: RngLike) -> "FidEnsemble":
        """Systematic resampling to ``M`` equally weighted draws."""
        gen = as_generator(rng)
        pos = (gen.random() + np.arange(self.M)) / self.M
        idx = np.minimum(np.searchsorted(np.cumsum(self.weights), pos), self.M - 1)
        return FidEnsemble(self.data, self.u[idx], np.full(self.M, 1.0 / self.M), self.knot_times,
                           self.knot_values[idx], self.interp, self.sampler)

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))


def _draw_importance(ev: np.ndarray, M: int, gen: np.random.Generator):
    n = ev.size
    nf = int(np.sum(ev))
    us = np.empty((M, n))
    # failure values are the sorted uniforms, assigned in time order
    us[:, ev] = np.sort(gen.random((M, nf)), axis=1)
    logw = np.zeros(M)
    running = np.zeros(M)
    draws = gen.random((M, n))
    for k in range(n):
        if ev[k]:
            running = us[:, k]
        else:
            us[:, k] = running + (1.0 - running) * draws[:, k]
            logw += np.log1p(-running)
    w = np.exp(logw - np.max(logw))
    return np.clip(us, np.nextafter(0, 1), np.nextafter(1, 0)), w / np.sum(w)


def _draw_rejection(ev: np.ndarray, M: int, gen: np.random.Generator, max_batches: int = 10_000):
    n = ev.size
    kept, total = [], 0
    tried = 0
    while total < M:
        u = gen.random((_REJECTION_BATCH, n))
        ok = _feasible_sorted(ev, u)
        tried += 1
        kept.append(u[ok])
        total += int(ok.sum())
        if tried >= max_batches:
            raise CapacityError("rejection sampling exhausted its batch budget; use the importance sampler")
    us = np.concatenate(kept)[:M]
    return us, np.full(M, 1.0 / M)


def acceptance_probability(data: SurvData, draws: int = 20_000, rng: RngLike = 0) -> float:
    """Probability that iid uniforms are feasible, by importance sampling.

    The importance proposal has density ``nf! / prod(1 - L_j)`` on the feasible
    set, so the acceptance rate is ``E[prod(1 - L_j)] / nf!``.
    """
    _, ev = data.sorted()
    gen = as_generator(rng)
    nf = int(np.sum(ev))
    us = np.empty((draws, ev.size))
    us[:, ev] = np.sort(gen.random((draws, nf)), axis=1)
    logw = np.zeros(draws)
    running = np.zeros(draws)
    for k in range(ev.size):
        if ev[k]:
            running = us[:, k]
        else:
            logw += np.log1p(-running)
    return float(np.mean(np.exp(logw)) / math.factorial(nf))


def _knots(ts: np.ndarray, ev: np.ndarray, us: np.ndarray, gen: np.random.Generator):
    """Values of the interpolated curve at the distinct observation times."""
    M, n = us.shape
    vals = np.empty((M, n))
    prev = np.ones(M)
    _, FU = _envelope_arrays(ts, ev, us, ts)
    # F^U evaluated at each observation's own time (censored constraint included)
    draws = gen.random((M, n))
    for k in range(n):
        if ev[k]:
            v = 1.0 - us[:, k]
        else:
            lo = 1.0 - FU[:, k]
            v = lo + (prev - lo) * draws[:, k]
        v = np.minimum(v, prev)
        vals[:, k] = v
        prev = v
    # keep the last value at each distinct time
    uniq, last = np.unique(ts[::-1], return_index=True)
    last = n - 1 - last
    kt, kv = uniq, vals[:, last]
    if kt[0] > 0:
        kt = np.concatenate([[0.0], kt])
        kv = np.concatenate([np.ones((M, 1)), kv], axis=1)
    return kt, kv


def sample_ensemble(data: SurvData, M: int, rng: RngLike, sampler: str = "importance",
                    interp: str = "log_linear") -> FidEnsemble:
    """Draw ``M`` fiducial survival curves.

    ``rejection`` keeps iid uniform vectors that are feasible (equal weights);
    ``importance`` draws failure values as sorted uniforms and each censored
    value uniformly above the running failure maximum ``L_j``, with weight
    ``prod_j (1 - L_j)``. The interpolated curve passes through ``1 - u_i`` at
    failures, through a uniform point between the lower envelope and the
    previous knot at censored times, and is log-linear between knots and flat
    after the last one (``log_linear``); ``midpoint`` averages the envelopes.
    """
    if M < MIN_ENSEMBLE:
        raise InsufficientSampleError(f"need M >= {MIN_ENSEMBLE}, got {M}")
    if interp not in ("log_linear", "midpoint"):
        raise ParameterError(f"interp must be 'log_linear' or 'midpoint', got {interp!r}")
    gen = as_generator(rng)
    ts, ev = data.sorted()
    if sampler == "importance":
        us, w = _draw_importance(ev, M, gen)
    elif sampler == "rejection":
        acc = acceptance_probability(data, rng=gen)
        if acc < MIN_ACCEPTANCE:
            raise CapacityError(f"rejection acceptance {acc:.2e} is below {MIN_ACCEPTANCE}; use the importance sampler")
        us, w = _draw_rejection(ev, M, gen)
    else:
        raise ParameterError(f"sampler must be 'importance' or 'rejection', got {sampler!r}")
    kt, kv = _knots(ts, ev, us, gen)
    return FidEnsemble(data, us, w, kt, kv, interp, sampler)


# ---------------------------------------------------------------------------
# inference

def weighted_quantile(x, w, q):
    """Smallest ``x`` whose weighted ECDF reaches ``q``."""
    x = np.asarray(x, dtype=float).ravel()
    o = np.argsort(x, kind="stable")
    cw = np.cumsum(np.asarray(w, dtype=float).ravel()[o])
    cw /= cw[-1]
    idx = np.clip(np.searchsorted(cw, np.asarray(q, dtype=float) - 1e-12, side="left"), 0, x.size - 1)
    return x[o][idx]


def pointwise_ci(ens: FidEnsemble, t: float, level: float = 0.95) -> CInterval:
    """Weighted equal-tailed interval of ``S^I(t)`` over the ensemble."""
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    if t < 0:
        raise DomainError("time must be nonnegative")
    vals = ens.interp_on(np.array([float(t)]))[:, 0]
    if not np.all(np.isfinite(vals)) or not np.isfinite(ens.weights).all():
        raise NumericalError("degenerate ensemble")
    a = (1 - level) / 2
    lo, hi = weighted_quantile(vals, ens.weights, [a, 1 - a])
    return CInterval(float(lo), float(hi), level)


@dataclass
class TwoSampleResult:
    p_value: float
    statistic: float
    grid: np.ndarray
    mean_difference: np.ndarray
    band_halfwidth_95: float
    M: int

    def as_dict(self) -> dict:
        return {"p_value": self.p_value, "statistic": self.statistic,
                "band_halfwidth_95": self.band_halfwidth_95, "M": self.M,
                "grid_points": int(self.grid.size)}


def comparison_grid(a: SurvData, b: SurvData, extra: int = 200) -> np.ndarray:
    lo = max(float(a.times.min()), float(b.times.min()), 0.0)
    hi = min(float(a.times.max()), float(b.times.max()))
    if not hi > lo:
        raise DomainError("the two samples' time ranges do not overlap")
    ts = np.concatenate([a.times, b.times, np.linspace(0.0, hi, extra)])
    return np.unique(ts[(ts >= 0) & (ts <= hi)])


def two_sample_test(a: SurvData, b: SurvData, M: int, rng: RngLike, grid=None,
                    sampler: str = "importance") -> TwoSampleResult:
    """Curvewise fiducial test of equal survival functions.

    Draws are paired across the two ensembles (independent streams, product
    weights) to form ``D_j = S^I_a,j - S^I_b,j`` on a common grid. With
    ``T_j = sup |D_j - Dbar|`` the level-``(1-alpha)`` curvewise band is
    ``{D : sup |D - Dbar| <= q_(1-alpha)(T)}``; the p-value is the largest
    alpha whose band still contains the zero curve, which is the weighted
    share of draws with ``T_j >= sup |Dbar|``.
    """
    gen = as_generator(rng)
    g = comparison_grid(a, b) if grid is None else np.asarray(grid, dtype=float)
    seeds = gen.integers(0, 2 ** 63 - 1, size=2)
    ea = sample_ensemble(a, M, int(seeds[0]), sampler)
    eb = sample_ensemble(b, M, int(seeds[1]), sampler)
    D = ea.interp_on(g) - eb.interp_on(g)
    w = ea.weights * eb.weights
    w = w / np.sum(w)
    dbar = w @ D
    T = np.max(np.abs(D - dbar[None, :]), axis=1)
    T0 = float(np.max(np.abs(dbar)))
    p = float(np.sum(w[T >= T0]))
    half = float(weighted_quantile(T, w, 0.95))
    return TwoSampleResult(p, T0, g, dbar, half, M)


# ---------------------------------------------------------------------------
# export

def ensemble_to_csv(ens: FidEnsemble, grid, metadata: Optional[dict] = None) -> str:
    """CSV rows ``draw_id, t, S_L, S_I, S_U, weight``."""
    g = np.asarray(grid, dtype=float)
    SL, SU = ens.envelopes_on(g)
    SI = ens.interp_on(g)
    buf = io.StringIO()
    for key, val in (metadata or {}).items():
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["draw_id", "t", "S_L", "S_I", "S_U", "weight"])
    for j in range(ens.M):
        wt = repr(float(ens.weights[j]))
        for i, t in enumerate(g):
            w.writerow([j, repr(float(t)), repr(float(SL[j, i])), repr(float(SI[j, i])),
                        repr(float(SU[j, i])), wt])
    return buf.getvalue()
