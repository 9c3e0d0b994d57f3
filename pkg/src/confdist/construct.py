"""Constructors for the standard confidence distributions.

Each function returns a :class:`~confdist.cdcore.CD`. Closed-form CDs carry
their density and inverse so that quantiles never need root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import interpolate, optimize, special
from scipy.stats import rankdata

from .cdcore import CD, GridCurve, isotonic
from .errors import (
    DegenerateSampleError,
    InsufficientSampleError,
    NormalizationError,
    ParameterError,
)
from .numeric import Dist, RngLike, as_generator, norm_cdf, norm_ppf

_MIN_BOOT = 100
_MIN_JOINT_DRAWS = 100
_EXACT_WILCOXON_MAX_N = 25


# ---------------------------------------------------------------------------
# samples

@dataclass(frozen=True, eq=False)
class Sample:
    """A finite, non-empty sample with cached summaries."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 1:
            raise InsufficientSampleError("sample is empty")
        if not np.all(np.isfinite(v)):
            raise ParameterError("sample entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def sd(self) -> float:
        return float(np.std(self.values, ddof=1)) if self.n > 1 else 0.0


def as_sample(x) -> Sample:
    return x if isinstance(x, Sample) else Sample(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# normal-theory CDs

def normal_mean_cd(xbar: float, n: int, sigma: float = 1.0) -> CD:
    """``H(mu) = Phi(sqrt(n) (mu - xbar) / sigma)`` for a known ``sigma``."""
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    se = sigma / math.sqrt(n)
    return CD(
        lambda m: norm_cdf((m - xbar) / se),
        kind="exact",
        density=lambda m: np.exp(-0.5 * ((m - xbar) / se) ** 2) / (se * math.sqrt(2 * math.pi)),
        ppf=lambda p: xbar + se * norm_ppf(p),
        center=xbar,
        scale=se,
        label="normal mean CD",
    )


def t_mean_cd_from_stats(xbar: float, s: float, n: int) -> CD:
    """Student-t CD for a normal mean from summary statistics."""
    if n < 2:
        raise InsufficientSampleError(f"need n >= 2, got {n}")
    if not s > 0:
        raise DegenerateSampleError("sample standard deviation is zero")
    se = s / math.sqrt(n)
    t = Dist.student_t(n - 1)
    return CD(
        lambda m: t.cdf((m - xbar) / se),
        kind="exact",
        density=lambda m: t.density((m - xbar) / se) / se,
        ppf=lambda p: xbar + se * float(t.quantile(p)),
        center=xbar,
        scale=se,
        label="t mean CD",
    )


def t_mean_cd(sample) -> CD:
    """``H(mu) = F_{t(n-1)}(sqrt(n) (mu - xbar) / s)``."""
    s = as_sample(sample)
    if s.n < 2:
        raise InsufficientSampleError(f"need n >= 2, got {s.n}")
    return t_mean_cd_from_stats(s.mean, s.sd, s.n)


def variance_cd_from_stats(s2: float, n: int) -> CD:
    """``H(v) = 1 - F_{chi2(n-1)}((n-1) s2 / v)`` on ``v > 0``."""
    if n < 2:
        raise InsufficientSampleError(f"need n >= 2, got {n}")
    if not s2 > 0:
        raise DegenerateSampleError("sample variance is zero")
    chi = Dist.chi_square(n - 1)
    ss = (n - 1) * s2

    def cdf(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.where(v > 0, ss / np.where(v > 0, v, 1.0), np.inf)
        return np.where(v > 0, chi.sf(x), 0.0)

    def dens(v):
        v = np.asarray(v, dtype=float)
        safe = np.where(v > 0, v, 1.0)
        x = ss / safe
        return np.where(v > 0, chi.density(x) * x / safe, 0.0)

    return CD(cdf, support=(0.0, math.inf), kind="exact", density=dens,
              ppf=lambda p: ss / float(chi.quantile(1.0 - p)),
              center=s2, scale=s2 * math.sqrt(2.0 / (n - 1)), label="variance CD")


def variance_cd(sample) -> CD:
    s = as_sample(sample)
    if s.n < 2:
        raise InsufficientSampleError(f"need n >= 2, got {s.n}")
    return variance_cd_from_stats(s.sd ** 2, s.n)


# ---------------------------------------------------------------------------
# bootstrap

def bootstrap_cd(theta_hat: float, boot, variant: str = "reflected") -> CD:
    """Bootstrap CD from replicates ``boot`` of the estimator.

    ``raw`` is the bootstrap distribution itself, ``P*(theta* <= theta)``;
    ``reflected`` is ``P*(theta* >= 2 theta_hat - theta)``.
    """
    b = np.asarray(boot, dtype=float).ravel()
    if b.size < _MIN_BOOT:
        raise InsufficientSampleError(f"need at least {_MIN_BOOT} bootstrap replicates, got {b.size}")
    if not np.all(np.isfinite(b)):
        raise ParameterError("bootstrap replicates must be finite")
    if variant == "raw":
        pts = np.sort(b)
        uniq, counts = np.unique(pts, return_counts=True)
        vals = np.cumsum(counts) / b.size
        curve = GridCurve(uniq, vals, "step", left=0.0, right=1.0)
    elif variant == "reflected":
        # theta* >= 2 theta_hat - theta  <=>  theta >= 2 theta_hat - theta*
        refl = 2.0 * theta_hat - b
        uniq, counts = np.unique(refl, return_counts=True)
        vals = np.cumsum(counts) / b.size
        curve = GridCurve(uniq, vals, "step", left=0.0, right=1.0)
    else:
        raise ParameterError(f"variant must be 'reflected' or 'raw', got {variant!r}")
    return CD.from_grid(curve, kind="asymptotic", label=f"bootstrap CD ({variant})")


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank

def signed_rank_pmf(n: int) -> np.ndarray:
    """Exact null pmf of the signed-rank sum ``W+`` on ``0..n(n+1)/2``."""
    top = n * (n + 1) // 2
    counts = np.zeros(top + 1)
    counts[0] = 1.0
    for r in range(1, n + 1):
        counts[r:] = counts[r:] + counts[:-r].copy()
    return counts / 2.0 ** n


def wilcoxon_location_cd(sample, grid=None, n_grid: int = 2001, pad: float = 0.1) -> CD:
    """Asymptotic CD for a symmetric location from signed-rank p-values.

    ``H(t)`` is the one-sided p-value of ``W+(t) = sum_{Y_i > t} R_i(t)`` for the
    null "location <= t", with ranks of ``|Y_i - t|``. Small samples without
    tied absolute deviations use the exact null distribution with a mid-p
    correction; otherwise a normal approximation averaging the two
    continuity corrections. The grid defaults to the data range widened by
    ``pad`` times its width on each side.
    """
    s = as_sample(sample)
    y = s.values
    n = s.n
    if n < 5:
        raise InsufficientSampleError(f"signed-rank CD needs n >= 5, got {n}")
    if grid is None:
        lo, hi = float(y.min()), float(y.max())
        w = (hi - lo) or 1.0
        grid = np.linspace(lo - pad * w, hi + pad * w, n_grid)
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ParameterError("grid must be a strictly increasing 1-d array")

    d = y[None, :] - t[:, None]
    a = np.abs(d)
    ranks = _midranks_rows(a)
    # zero differences carry no sign; they count half toward W+
    w_plus = np.sum(np.where(d > 0, ranks, 0.0) + np.where(d == 0, 0.5 * ranks, 0.0), axis=1)
    tied = _rows_with_ties(a)

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    h = np.empty(t.size)
    if n <= _EXACT_WILCOXON_MAX_N:
        pmf = signed_rank_pmf(n)
        sf_gt = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])  # P(W > k)
        k = np.floor(w_plus + 1e-9).astype(int)
        is_int = np.abs(w_plus - np.round(w_plus)) < 1e-9
        kk = np.clip(k, 0, pmf.size - 1)
        exact = np.where(is_int, sf_gt[kk] + 0.5 * pmf[kk], sf_gt[kk])
        h[~tied] = exact[~tied]
        rows = tied
    else:
        rows = np.ones(t.size, dtype=bool)
    if np.any(rows):
        v = var - _tie_correction_rows(a[rows]) / 48.0
        sd = np.sqrt(np.maximum(v, 1e-300))
        wp = w_plus[rows]
        h[rows] = 0.5 * ((1.0 - norm_cdf((wp - 0.5 - mu) / sd)) + (1.0 - norm_cdf((wp + 0.5 - mu) / sd)))
    h = isotonic(h)
    curve = GridCurve(t, h, "linear")
    return CD.from_grid(curve, kind="asymptotic", label="signed-rank location CD")


def _midranks_rows(a: np.ndarray) -> np.ndarray:
    return rankdata(a, axis=1, method="average")


def _rows_with_ties(a: np.ndarray) -> np.ndarray:
    srt = np.sort(a, axis=1)
    return np.any(np.diff(srt, axis=1) == 0, axis=1)


def _tie_correction_rows(a: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape[0])
    for i, row in enumerate(a):
        _, c = np.unique(row, return_counts=True)
        out[i] = float(np.sum(c ** 3 - c))
    return out


# ---------------------------------------------------------------------------
# normalized likelihood

@dataclass
class LikelihoodCD:
    """Normalized-likelihood CD together with its normal approximation."""

    cd: CD
    normal_approx: CD
    mle: float
    observed_information: float


def likelihood_cd(loglik: Callable, support=(-math.inf, math.inf), start: Optional[float] = None,
                  n_grid: int = 2001, drop: float = 60.0) -> LikelihoodCD:
    """``G(theta) = int^theta exp(l) / int exp(l)`` for a log-likelihood ``l``.

    The integrand is evaluated as ``exp(l - max l)``. Infinite support ends
    are truncated where ``l`` falls ``drop`` below its maximum; if no such
    point exists within 60 doublings the tail is treated as non-integrable.
    Cell integrals use 5-point Gauss-Legendre rules and ``G`` between nodes is
    a cubic Hermite interpolant with the exact density as slope.
    """
    lo_s, hi_s = float(support[0]), float(support[1])
    if not lo_s < hi_s:
        raise ParameterError(f"empty support {support}")
    ll = _vectorize(loglik)

    if start is None:
        if math.isfinite(lo_s) and math.isfinite(hi_s):
            start = 0.5 * (lo_s + hi_s)
        elif math.isfinite(lo_s):
            start = lo_s + 1.0
        elif math.isfinite(hi_s):
            start = hi_s - 1.0
        else:
            start = 0.0
    a, b, lmax0 = _likelihood_range(ll, lo_s, hi_s, float(start), drop)

    xs = np.linspace(a, b, n_grid)
    lx = ll(xs)
    # refine the peak so the max-shift is exact
    i = int(np.argmax(lx))
    mle = float(xs[i])
    lmax = float(lx[i])
    if 0 < i < xs.size - 1:
        res = optimize.minimize_scalar(lambda x: -float(ll(np.array([x]))[0]),
                                       bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                                       options={"xatol": 1e-10 * max(1.0, abs(xs[i]))})
        if -res.fun >= lmax:
            mle, lmax = float(res.x), float(-res.fun)
    lmax = max(lmax, lmax0)

    nodes, weights = np.polynomial.legendre.leggauss(5)
    left, right = xs[:-1], xs[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = np.exp(ll(pts.ravel()).reshape(pts.shape) - lmax)
    cell = half * (vals @ weights)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    total = cum[-1]
    if not (np.isfinite(total) and total > 0):
        raise NormalizationError("likelihood could not be normalized")
    H = cum / total
    dens_nodes = np.exp(lx - lmax) / total
    spline = interpolate.CubicHermiteSpline(xs, H, dens_nodes)

    def cdf(theta):
        th = np.asarray(theta, dtype=float)
        out = np.clip(spline(np.clip(th, a, b)), 0.0, 1.0)
        return np.where(th < a, 0.0, np.where(th > b, 1.0, out))

    def dens(theta):
        th = np.asarray(theta, dtype=float)
        inside = (th >= a) & (th <= b)
        val = np.exp(ll(np.clip(th, a, b)) - lmax) / total
        return np.where(inside, val, 0.0)

    sd_g = math.sqrt(max(float(np.sum(cell * (mid - np.sum(cell * mid) / total) ** 2) / total), 1e-300))
    cd = CD(cdf, support=(lo_s, hi_s), kind="asymptotic", density=dens,
            center=mle, scale=sd_g, label="normalized likelihood CD")

    info = _observed_information(ll, mle, sd_g, lo_s, hi_s)
    if info > 0:
        sd = 1.0 / math.sqrt(info)
        approx = normal_mean_cd(mle, 1, sd)
    else:
        # flat or non-concave at the peak: no normal approximation available
        approx = CD(lambda th: np.full(np.shape(th), np.nan), kind="asymptotic",
                    label="undefined normal approximation")
    return LikelihoodCD(cd, approx, mle, info)


def _vectorize(f: Callable) -> Callable:
    def g(x):
        x = np.asarray(x, dtype=float)
        # log(0) at a support end is a legitimate -inf
        with np.errstate(divide="ignore", invalid="ignore"):
            try:
                out = np.asarray(f(x), dtype=float)
                if out.shape != x.shape:
                    out = np.broadcast_to(out, x.shape).astype(float)
            except (TypeError, ValueError):
                out = np.array([float(f(v)) for v in x.ravel()]).reshape(x.shape)
        return np.where(np.isnan(out), -np.inf, out)

    return g


def _likelihood_range(ll, lo_s, hi_s, start, drop):
    l0 = float(ll(np.array([start]))[0])
    if not np.isfinite(l0):
        raise NormalizationError(f"log-likelihood is not finite at the start point {start}")
    # coarse scan outward to find the peak region and the truncation points
    best_x, best_l = start, l0

    def scan(direction, bound):
        nonlocal best_x, best_l
        if math.isfinite(bound):
            return bound
        step = 1.0
        for _ in range(60):
            x = best_x + direction * step
            lx = float(ll(np.array([x]))[0])
            if lx > best_l:
                best_x, best_l = x, lx
            elif lx < best_l - drop:
                return x
            step *= 2.0
        raise NormalizationError("log-likelihood tail does not decay: not integrable")

    a = scan(-1.0, lo_s)
    b = scan(+1.0, hi_s)
    if not math.isfinite(lo_s):
        a = scan(-1.0, lo_s)  # the peak may have moved right during the second scan
    return a, b, best_l


def _observed_information(ll, mle, scale, lo_s, hi_s) -> float:
    h = 1e-3 * scale
    if mle - h <= lo_s or mle + h >= hi_s:
        return 0.0
    f = lambda x: float(ll(np.array([x]))[0])
    return -(f(mle + h) - 2.0 * f(mle) + f(mle - h)) / (h * h)


# ---------------------------------------------------------------------------
# binomial proportion

def _binom_terms(n: int, ks: np.ndarray, p: np.ndarray) -> np.ndarray:
    """pmf terms C(n,k) p^k (1-p)^(n-k) for every (p, k) pair, shape (len(p), len(ks))."""
    logc = np.array([math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) for k in ks])
    pp = p[:, None]
    k = ks[None, :].astype(float)
    return np.exp(logc[None, :] + special.xlogy(k, pp) + special.xlog1py(n - k, -pp))


def binomial_tail(n: int, x: int, p) -> np.ndarray:
    """``sum_{x < k <= n} C(n,k) p^k (1-p)^(n-k)`` by direct summation."""
    pa = np.atleast_1d(np.asarray(p, dtype=float))
    ks = np.arange(x + 1, n + 1)
    if ks.size == 0:
        out = np.zeros(pa.shape)
    else:
        out = _binom_terms(n, ks, pa).sum(axis=1)
    return out.reshape(np.shape(p)) if np.ndim(p) else out.reshape(())


def binomial_cd(x: int, n: int, kind: str = "half") -> CD:
    """Upper, lower or half-corrected CD for a binomial proportion.

    ``upper`` is ``P_p(X > x)``, ``lower`` is ``P_p(X >= x)`` and ``half`` their
    average. Evaluated by explicit pmf sums.
    """
    if n < 1 or x != int(x) or n != int(n):
        raise ParameterError(f"need integer n >= 1, got n={n}")
    if not 0 <= x <= n:
        raise ParameterError(f"x must lie in [0, n], got x={x}, n={n}")
    x, n = int(x), int(n)

    def upper(p):
        return binomial_tail(n, x, p)

    def lower(p):
        return binomial_tail(n, x - 1, p) if x > 0 else np.ones(np.shape(p))

    def beta_dens(a, b, p):
        # density of Beta(a, b); a point mass (a or b zero) has none in the interior
        if a <= 0 or b <= 0:
            return np.zeros(np.shape(p))
        pp = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp(special.xlogy(a - 1, pp) + special.xlog1py(b - 1, -pp) - special.betaln(a, b))

    if kind == "upper":
        cdf, dens, cdkind = upper, lambda p: beta_dens(x + 1, n - x, p), "upper"
    elif kind == "lower":
        cdf, dens, cdkind = lower, lambda p: beta_dens(x, n - x + 1, p), "lower"
    elif kind == "half":
        cdf = lambda p: 0.5 * (upper(p) + lower(p))
        dens = lambda p: 0.5 * (beta_dens(x + 1, n - x, p) + beta_dens(x, n - x + 1, p))
        cdkind = "half_corrected"
    else:
        raise ParameterError(f"kind must be 'upper', 'lower' or 'half', got {kind!r}")

    def clipped(p):
        p = np.asarray(p, dtype=float)
        return np.where(p <= 0, cdf(np.zeros_like(p)), np.where(p >= 1, cdf(np.ones_like(p)), cdf(np.clip(p, 0, 1))))

    return CD(clipped, support=(0.0, 1.0), kind=cdkind, density=dens,
              center=(x + 0.5) / (n + 1), scale=0.5 / math.sqrt(n + 1),
              label=f"binomial {kind} CD")


# ---------------------------------------------------------------------------
# correlation

def fisher_z_cd(r: float, n: int) -> CD:
    """``H(rho) = 1 - Phi(sqrt(n-3) (atanh r - atanh rho))`` on ``(-1, 1)``."""
    if not -1.0 < r < 1.0:
        raise ParameterError(f"|r| must be < 1, got {r}")
    if n < 4:
        raise InsufficientSampleError(f"Fisher z needs n >= 4, got {n}")
    z = math.atanh(r)
    se = 1.0 / math.sqrt(n - 3)

    def cdf(rho):
        rho = np.asarray(rho, dtype=float)
        with np.errstate(divide="ignore"):
            zr = np.arctanh(np.clip(rho, -1.0, 1.0))
        return norm_cdf((zr - z) / se)

    def dens(rho):
        rho = np.asarray(rho, dtype=float)
        inside = np.abs(rho) < 1
        rr = np.where(inside, rho, 0.0)
        u = (np.arctanh(rr) - z) / se
        return np.where(inside, np.exp(-0.5 * u * u) / (se * math.sqrt(2 * math.pi) * (1 - rr * rr)), 0.0)

    return CD(cdf, support=(-1.0, 1.0), kind="asymptotic", density=dens,
              ppf=lambda p: math.tanh(z + se * norm_ppf(p)), center=r, scale=se * (1 - r * r),
              label="Fisher z CD")


# ---------------------------------------------------------------------------
# two-parameter exponential

@dataclass(frozen=True)
class Exp2Fit:
    mu_hat: float
    sigma_hat: float
    n: int
    k: int

    def __post_init__(self):
        if not 1 < self.k <= self.n:
            raise ParameterError(f"need 1 < k <= n, got k={self.k}, n={self.n}")
        if not self.sigma_hat > 0:
            raise DegenerateSampleError("sigma_hat must be positive")


def exp2_fit(sample, k: Optional[int] = None) -> Exp2Fit:
    """MLEs of location and scale from the first ``k`` order statistics."""
    x = np.sort(as_sample(sample).values)
    n = x.size
    k = n if k is None else int(k)
    if not 1 < k <= n:
        raise ParameterError(f"need 1 < k <= n, got k={k}, n={n}")
    mu = float(x[0])
    sig = (float(np.sum(x[:k])) + (n - k) * float(x[k - 1]) - n * mu) / k
    if not sig > 0:
        raise DegenerateSampleError("the first k order statistics are all equal")
    return Exp2Fit(mu, sig, n, k)


def exp2_cds(fit: Exp2Fit):
    """Exact CDs ``(H1, H2)`` for the location and the scale.

    With ``U = 2n(mu_hat - mu)/sigma ~ chi2(2)`` and
    ``V = 2k sigma_hat/sigma ~ chi2(2k-2)`` independent, the location pivot is
    ``n(mu_hat - mu)/(k sigma_hat) = U/V`` and ``(k-1) U/V ~ F(2, 2k-2)``.
    """
    mu, sig, n, k = fit.mu_hat, fit.sigma_hat, fit.n, fit.k
    F = Dist.fisher_f(2, 2 * k - 2)
    chi = Dist.chi_square(2 * k - 2)
    c = (k - 1) * n / (k * sig)

    def h1(m):
        m = np.asarray(m, dtype=float)
        return np.where(m >= mu, 1.0, F.sf(c * (mu - np.minimum(m, mu))))

    def d1(m):
        m = np.asarray(m, dtype=float)
        return np.where(m < mu, F.density(c * (mu - np.minimum(m, mu))) * c, 0.0)

    H1 = CD(h1, support=(-math.inf, mu), kind="exact", density=d1,
            ppf=lambda p: mu - float(F.quantile(1.0 - p)) / c,
            center=mu - sig / n, scale=sig / n, label="exp2 location CD")

    def h2(s):
        s = np.asarray(s, dtype=float)
        safe = np.where(s > 0, s, 1.0)
        return np.where(s > 0, chi.sf(2 * k * sig / safe), 0.0)

    def d2(s):
        s = np.asarray(s, dtype=float)
        safe = np.where(s > 0, s, 1.0)
        x = 2 * k * sig / safe
        return np.where(s > 0, chi.density(x) * x / safe, 0.0)

    H2 = CD(h2, support=(0.0, math.inf), kind="exact", density=d2,
            ppf=lambda p: 2 * k * sig / float(chi.quantile(1.0 - p)),
            center=sig, scale=sig / math.sqrt(k), label="exp2 scale CD")
    return H1, H2


@dataclass(frozen=True, eq=False)
class JointExpDraws:
    xi: np.ndarray
    zeta: np.ndarray
    fit: Exp2Fit


def exp2_joint_draws(fit: Exp2Fit, M: int, rng: RngLike) -> JointExpDraws:
    """Joint CD draws ``xi = mu_hat - (k sigma_hat / n) U/V``, ``zeta = 2k sigma_hat / V``."""
    if M < _MIN_JOINT_DRAWS:
        raise InsufficientSampleError(f"need at least {_MIN_JOINT_DRAWS} draws, got {M}")
    gen = as_generator(rng)
    u = gen.chisquare(2, size=M)
    v = gen.chisquare(2 * fit.k - 2, size=M)
    xi = fit.mu_hat - (fit.k * fit.sigma_hat / fit.n) * (u / v)
    zeta = 2 * fit.k * fit.sigma_hat / v
    return JointExpDraws(xi, zeta, fit)


def exp2_survival(t, mu: float, sigma: float) -> np.ndarray:
    """Survival ``exp(-(t - mu)/sigma)`` clamped to 1 for ``t <= mu``."""
    t = np.asarray(t, dtype=float)
    return np.minimum(1.0, np.exp(-(t - mu) / sigma))


@dataclass(frozen=True, eq=False)
class SurvivalBand:
    t: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    side: str


def _nearest_rank(sorted_cols: np.ndarray, q: float) -> np.ndarray:
    m = sorted_cols.shape[0]
    idx = min(max(int(math.ceil(q * m)) - 1, 0), m - 1)
    return sorted_cols[idx]


def exp2_survival_band(draws: JointExpDraws, tgrid, level: float = 0.95, side: str = "lower") -> SurvivalBand:
    """Pointwise band for the survival curve from the joint CD draws.

    ``lower`` gives ``[kappa_(alpha), 1]``; ``two`` gives
    ``[kappa_(alpha/2), kappa_(1-alpha/2)]`` using nearest-rank order statistics.
    """
    t = np.asarray(tgrid, dtype=float).ravel()
    if t.size == 0:
        raise ParameterError("time grid is empty")
    if np.any(t <= 0):
        raise ParameterError("time grid values must be positive")
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    alpha = 1.0 - level
    kappa = np.minimum(1.0, np.exp(-(t[None, :] - draws.xi[:, None]) / draws.zeta[:, None]))
    kappa = np.sort(np.clip(kappa, 0.0, 1.0), axis=0)
    if side == "lower":
        lo = _nearest_rank(kappa, alpha)
        hi = np.ones_like(lo)
    elif side == "two":
        lo = _nearest_rank(kappa, alpha / 2)
        hi = _nearest_rank(kappa, 1 - alpha / 2)
    else:
        raise ParameterError(f"side must be 'lower' or 'two', got {side!r}")
    return SurvivalBand(t, lo, hi, level, side)
