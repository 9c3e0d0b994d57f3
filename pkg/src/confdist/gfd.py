"""Generalized fiducial distributions.

For a data generating equation ``Y = G(U, theta)`` the fiducial density is
``r(theta | y) ∝ f(y, theta) J(y, theta)`` where ``J`` applies a
determinant-type functional ``D`` to the derivative matrix ``dG/dtheta``
evaluated at ``u = G^-1(y, theta)``. This module provides the two standard
choices of ``D``, grid evaluation of ``r`` for one or two parameters,
closed-form samplers for linear regression, the irregular uniform family,
half-corrected discrete GFDs and fiducial model probabilities.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, linalg, optimize, special, stats
from scipy.stats import qmc

from .cdcore import CD, GridCurve
from .errors import (
    CapacityError,
    DegenerateModelError,
    DomainError,
    ParameterError,
    ShapeError,
)
from .numeric import Dist, RngLike, as_generator, digamma

LINF_CAP = 1_000_000


# ---------------------------------------------------------------------------
# Jacobian functionals

def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {A.shape}")
    n, p = A.shape
    if p < 1 or n < p:
        raise ShapeError(f"need n >= p >= 1, got n={n}, p={p}")
    return A


def jacobian_l2(A) -> float:
    """``sqrt(det(A^T A))`` from a column-pivoted QR; 0 for rank-deficient ``A``."""
    A = _as_matrix(A)
    R = linalg.qr(A, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return 0.0
    tol = max(A.shape) * np.finfo(float).eps * d[0]
    if np.any(d <= tol):
        return 0.0
    return float(np.prod(d))


def jacobian_linf(A, cap: int = LINF_CAP) -> float:
    """Sum over all ``p``-row subsets of ``|det|`` of the ``p x p`` submatrix."""
    A = _as_matrix(A)
    n, p = A.shape
    count = math.comb(n, p)
    if count > cap:
        raise CapacityError(
            f"C({n},{p}) = {count} row subsets exceeds the cap {cap}; use the l2 Jacobian instead"
        )
    if p == 1:
        return float(np.sum(np.abs(A[:, 0])))
    idx = np.array(list(itertools.combinations(range(n), p)), dtype=np.intp)
    total = 0.0
    for chunk in np.array_split(idx, max(1, idx.shape[0] // 100_000)):
        total += float(np.sum(np.abs(np.linalg.det(A[chunk]))))
    return total


# ---------------------------------------------------------------------------
# models and grid densities

@dataclass
class FidModel:
    """A parametric model for fiducial computation.

    ``loglik(y, theta)`` and ``jac(y, theta)`` take ``theta`` as an array whose
    last axis has length ``dim`` (or a plain array when ``dim == 1``) and
    return arrays of the broadcast shape.
    """

    loglik: Callable
    jac: Callable
    theta_support: tuple
    dim: int = 1
    n_obs: int = 0
    label: str = ""


@dataclass(frozen=True, eq=False)
class GridSurface:
    """A normalized density on a rectangular two-parameter grid."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def marginal(self, axis: int = 0) -> GridCurve:
        if axis == 0:
            return GridCurve(self.x, integrate.simpson(self.values, x=self.y, axis=1), "linear", 0.0, 0.0)
        return GridCurve(self.y, integrate.simpson(self.values, x=self.x, axis=0), "linear", 0.0, 0.0)

    def total(self) -> float:
        return float(integrate.simpson(integrate.simpson(self.values, x=self.y, axis=1), x=self.x))


def _log_unnormalized(model: FidModel, y, theta) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lf = np.asarray(model.loglik(y, theta), dtype=float)
        j = np.asarray(model.jac(y, theta), dtype=float)
        if np.any(j < 0):
            raise DegenerateModelError("the Jacobian function returned a negative value")
        out = lf + np.log(j)
    return np.where(np.isnan(out), -np.inf, out)


def _check_grid(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size < 3 or np.any(np.diff(g) <= 0):
        raise ParameterError("grid must be a strictly increasing 1-d array of at least 3 points")
    return g


def gfd_density(model: FidModel, y, grid):
    """Normalized fiducial density on a grid (``dim`` 1 or 2).

    Returns a :class:`GridCurve` for one parameter and a :class:`GridSurface`
    for two. Work is done in log space with one max-shift; the normalizer is
    composite Simpson on the grid.
    """
    if model.dim == 1:
        t = _check_grid(grid)
        lr = _log_unnormalized(model, y, t)
        m = np.max(lr)
        if not np.isfinite(m):
            raise DegenerateModelError("fiducial density is zero on the whole grid")
        w = np.exp(lr - m)
        z = integrate.simpson(w, x=t)
        if not z > 0:
            raise DegenerateModelError("zero normalizing constant")
        return GridCurve(t, w / z, "linear", 0.0, 0.0)
    if model.dim == 2:
        if len(grid) != 2:
            raise ParameterError("a two-parameter grid is a pair of 1-d arrays")
        gx, gy = _check_grid(grid[0]), _check_grid(grid[1])
        TX, TY = np.meshgrid(gx, gy, indexing="ij")
        lr = _log_unnormalized(model, y, np.stack([TX, TY], axis=-1))
        m = np.max(lr)
        if not np.isfinite(m):
            raise DegenerateModelError("fiducial density is zero on the whole grid")
        w = np.exp(lr - m)
        z = integrate.simpson(integrate.simpson(w, x=gy, axis=1), x=gx)
        if not z > 0:
            raise DegenerateModelError("zero normalizing constant")
        return GridSurface(gx, gy, w / z)
    raise ParameterError(f"grid evaluation supports 1 or 2 parameters, got {model.dim}")


def log_integral(model: FidModel, y, grid) -> float:
    """``log int f J dtheta`` by Simpson on the grid."""
    if model.dim == 1:
        t = _check_grid(grid)
        lr = _log_unnormalized(model, y, t)
        m = np.max(lr)
        if not np.isfinite(m):
            return -math.inf
        return float(m + math.log(integrate.simpson(np.exp(lr - m), x=t)))
    if model.dim == 2:
        gx, gy = _check_grid(grid[0]), _check_grid(grid[1])
        TX, TY = np.meshgrid(gx, gy, indexing="ij")
        lr = _log_unnormalized(model, y, np.stack([TX, TY], axis=-1))
        m = np.max(lr)
        if not np.isfinite(m):
            return -math.inf
        inner = integrate.simpson(np.exp(lr - m), x=gy, axis=1)
        return float(m + math.log(integrate.simpson(inner, x=gx)))
    raise ParameterError(f"grid evaluation supports 1 or 2 parameters, got {model.dim}")


def density_to_cd(curve: GridCurve, label: str = "fiducial CD", kind: str = "asymptotic") -> CD:
    """CD from a grid density (cumulative trapezoid, renormalized)."""
    cum = integrate.cumulative_trapezoid(curve.values, curve.thetas, initial=0.0)
    if not cum[-1] > 0:
        raise DegenerateModelError("density has no mass")
    H = GridCurve(curve.thetas, cum / cum[-1], "linear", 0.0, 1.0)
    cd = CD.from_grid(H, kind=kind, label=label)
    cd.density_grid = GridCurve(curve.thetas, curve.values / cum[-1], "linear", 0.0, 0.0)
    return cd


# ---------------------------------------------------------------------------
# built-in families

def _theta_last(theta, dim):
    theta = np.asarray(theta, dtype=float)
    if dim == 1:
        return (theta,)
    return tuple(theta[..., i] for i in range(dim))


def family_model(name: str, y, **params) -> FidModel:
    """Fiducial model for a named family with the l-infinity Jacobian.

    ``normal_mean`` (``sigma`` known), ``normal`` (mean and sd),
    ``exponential`` (rate) and ``uniform_scale`` (``U(0, theta)``).
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 1:
        raise ParameterError("need at least one observation")
    if name == "normal_mean":
        sigma = float(params.get("sigma", 1.0))
        if not sigma > 0:
            raise ParameterError("sigma must be positive")

        def ll(yy, th):
            (mu,) = _theta_last(th, 1)
            z = (yy[:, None] - np.ravel(mu)[None, :]) / sigma
            return (-0.5 * np.sum(z * z, axis=0) - n * math.log(sigma * math.sqrt(2 * math.pi))).reshape(np.shape(mu))

        # Y = mu + sigma Z: dG/dmu = 1 in every row
        return FidModel(ll, lambda yy, th: np.full(np.shape(th), float(n)), ((-math.inf, math.inf),), 1, n, name)
    if name == "normal":
        if n < 2:
            raise ParameterError("the two-parameter normal needs n >= 2")
        d = float(np.sum(np.abs(y[:, None] - y[None, :])) / 2.0)

        def ll(yy, th):
            mu, sd = _theta_last(th, 2)
            shape = np.shape(mu)
            mu, sd = np.ravel(mu), np.ravel(sd)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = (yy[:, None] - mu[None, :]) / sd[None, :]
                out = -0.5 * np.sum(z * z, axis=0) - n * np.log(sd * math.sqrt(2 * math.pi))
            return np.where(sd > 0, out, -np.inf).reshape(shape)

        def jac(yy, th):
            # rows (1, z_i): every 2x2 minor is z_j - z_i
            _, sd = _theta_last(th, 2)
            with np.errstate(divide="ignore"):
                return np.where(sd > 0, d / np.where(sd > 0, sd, 1.0), 0.0)

        return FidModel(ll, jac, ((-math.inf, math.inf), (0.0, math.inf)), 2, n, name)
    if name == "exponential":
        if np.any(y < 0):
            raise DomainError("exponential data must be nonnegative")
        s = float(np.sum(y))

        def ll(yy, th):
            (lam,) = _theta_last(th, 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(lam > 0, n * np.log(np.where(lam > 0, lam, 1.0)) - lam * s, -np.inf)

        def jac(yy, th):
            # Y = -log(U)/lam: |dG/dlam| = y/lam
            (lam,) = _theta_last(th, 1)
            return np.where(lam > 0, s / np.where(lam > 0, lam, 1.0), 0.0)

        return FidModel(ll, jac, ((0.0, math.inf),), 1, n, name)
    if name == "uniform_scale":
        if np.any(y <= 0):
            raise DomainError("U(0, theta) data must be positive")
        top, s = float(np.max(y)), float(np.sum(y))

        def ll(yy, th):
            (t,) = _theta_last(th, 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(t > top, -n * np.log(np.where(t > 0, t, 1.0)), -np.inf)

        def jac(yy, th):
            (t,) = _theta_last(th, 1)
            return np.where(t > 0, s / np.where(t > 0, t, 1.0), 0.0)

        return FidModel(ll, jac, ((top, math.inf),), 1, n, name)
    raise ParameterError(f"unknown family {name!r}")


FAMILIES = ("normal_mean", "normal", "exponential", "uniform_scale")


# ---------------------------------------------------------------------------
# linear regression

@dataclass
class RegressionDraws:
    beta: np.ndarray
    sigma: np.ndarray
    method: str
    ess: float

    def interval(self, j: int, level: float = 0.95) -> tuple:
        a = (1 - level) / 2
        return tuple(float(v) for v in np.quantile(self.beta[:, j], [a, 1 - a]))


def _uniforms(gen: np.random.Generator, m: int, d: int, method: str) -> np.ndarray:
    if method == "mc":
        return gen.random((m, d))
    if method == "qmc":
        # scrambled Sobol prefix; m need not be a power of two
        eng = qmc.Sobol(d, scramble=True, seed=gen)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            u = eng.random(m)
        return np.clip(u, 1e-16, 1 - 1e-16)
    raise ParameterError(f"method must be 'qmc' or 'mc', got {method!r}")


def gfd_linear_regression(X, y, error_density: Optional[Dist] = None, M: int = 100_000,
                          rng: RngLike = None, method: str = "qmc") -> RegressionDraws:
    """Fiducial draws of ``(beta, sigma)`` for ``y = X beta + sigma e``.

    With normal errors (the default) the draws are exact: ``sigma^2 = RSS/chi2(n-p)``
    and ``beta | sigma ~ N(beta_hat, sigma^2 (X^T X)^-1)``. ``method='qmc'``
    drives that transform with scrambled Sobol points, ``'mc'`` with plain
    uniforms. Other standardized error densities use importance resampling
    from the normal-error draws (tails widened) towards
    ``sigma^(-n-1) prod f((y - X beta)/sigma)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.size != n:
        raise ShapeError(f"X has {n} rows but y has {y.size} entries")
    if n <= p:
        raise DegenerateModelError(f"need n > p, got n={n}, p={p}")
    if M < 1:
        raise ParameterError("M must be positive")
    Q, R = np.linalg.qr(X)
    if np.min(np.abs(np.diag(R))) <= max(n, p) * np.finfo(float).eps * np.max(np.abs(np.diag(R))):
        raise DegenerateModelError("design matrix is rank deficient")
    beta_hat = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta_hat
    rss = float(resid @ resid)
    # residuals at rounding level mean an exact fit
    if not rss > (n * np.finfo(float).eps * float(np.linalg.norm(y))) ** 2:
        raise DegenerateModelError("residual sum of squares is zero")
    gen = as_generator(rng)
    if error_density is None or error_density.kind == "normal":
        u = _uniforms(gen, M, p + 1, method)
        sigma = np.sqrt(rss / stats.chi2.ppf(u[:, 0], n - p))
        z = stats.norm.ppf(u[:, 1:])
        beta = beta_hat[None, :] + sigma[:, None] * linalg.solve_triangular(R, z.T).T
        return RegressionDraws(beta, sigma, method, float(M))
    return _regression_importance(X, y, error_density, M, gen, beta_hat, rss)


def _regression_importance(X, y, error_density: Dist, M: int, gen, beta_hat, rss,
                           df: float = 4.0, inflate: float = 1.5) -> RegressionDraws:
    """Importance resampling with a multivariate-t proposal on ``(beta, log sigma)``."""
    n, p = X.shape

    def log_target(eta):
        eta = np.atleast_2d(eta)
        b, ls = eta[:, :p], eta[:, p]
        e = (y[None, :] - b @ X.T) / np.exp(ls)[:, None]
        # sigma^(-n-1) dsigma = sigma^(-n) dlog(sigma)
        return np.sum(error_density.logpdf(e), axis=1) - n * ls

    x0 = np.concatenate([beta_hat, [0.5 * math.log(rss / (n - p))]])
    res = optimize.minimize(lambda e: -float(log_target(e)[0]), x0, method="BFGS")
    mode = res.x
    hess = _numeric_hessian(lambda e: float(log_target(e)[0]), mode)
    try:
        cov = np.linalg.inv(-hess)
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DegenerateModelError("fiducial density is not locally concave at its mode") from None
    prop = stats.multivariate_t(loc=mode, shape=inflate ** 2 * cov, df=df)
    eta = np.atleast_2d(prop.rvs(size=M, random_state=gen)).reshape(M, p + 1)
    lw = log_target(eta) - prop.logpdf(eta)
    lw = np.where(np.isfinite(lw), lw, -np.inf)
    w = np.exp(lw - np.max(lw))
    w /= np.sum(w)
    ess = float(1.0 / np.sum(w * w))
    # systematic resampling
    pos = (gen.random() + np.arange(M)) / M
    idx = np.minimum(np.searchsorted(np.cumsum(w), pos), M - 1)
    return RegressionDraws(eta[idx, :p], np.exp(eta[idx, p]), "importance", ess)


def _numeric_hessian(f: Callable, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    k = x.size
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei, ej = np.eye(k)[i] * h, np.eye(k)[j] * h
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H


# ---------------------------------------------------------------------------
# irregular uniform family Y = a(theta) + b(theta) U, U ~ U(-1, 1)

def _solve_increasing(f: Callable, target: float, domain: tuple) -> float:
    """Root of ``f(theta) = target`` for increasing ``f``, clamped to the domain ends."""
    lo, hi = domain
    if math.isfinite(lo):
        if f(lo) >= target:
            return lo
        a = lo
    else:
        a, step = -1.0, 1.0
        while f(a) > target:
            a, step = a - step, 2 * step
            if step > 1e300:
                raise DegenerateModelError("could not bracket the feasibility boundary")
    if math.isfinite(hi):
        if f(hi) <= target:
            return hi
        b = hi
    else:
        b, step = max(a, 0.0) + 1.0, 1.0
        while f(b) < target:
            b, step = b + step, 2 * step
            if step > 1e300:
                raise DegenerateModelError("could not bracket the feasibility boundary")
    return float(optimize.brentq(lambda t: f(t) - target, a, b, xtol=1e-14,
                                 rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass
class IrregularUniform:
    """Location-scale uniform model with ``a' > |b'|`` and ``b > 0``."""

    a: Callable
    da: Callable
    b: Callable
    db: Callable
    domain: tuple = (-math.inf, math.inf)

    def feasible(self, y) -> tuple:
        """Open interval of ``theta`` with ``a - b < y_(1)`` and ``a + b > y_(n)``."""
        y = np.asarray(y, dtype=float)
        y1, yn = float(np.min(y)), float(np.max(y))
        lo = _solve_increasing(lambda t: float(self.a(t) + self.b(t)), yn, self.domain)
        hi = _solve_increasing(lambda t: float(self.a(t) - self.b(t)), y1, self.domain)
        if not lo < hi:
            raise DegenerateModelError("empty feasible set for these observations")
        return lo, hi


def u_theta_model() -> IrregularUniform:
    """``U(theta, theta^2)`` for ``theta > 1``."""
    return IrregularUniform(
        a=lambda t: (t * t + t) / 2.0,
        da=lambda t: t + 0.5,
        b=lambda t: (t * t - t) / 2.0,
        db=lambda t: t - 0.5,
        domain=(1.0, math.inf),
    )


def _r2_weights(model: IrregularUniform, y) -> tuple:
    n = y.size
    c = (n - 1) / (n + 1)
    y1, yn = float(np.min(y)), float(np.max(y))
    # h1^-1(theta) = a - c b and h2^-1(theta) = a + c b; both increasing when a' > |b'|
    t1 = _solve_increasing(lambda t: float(model.a(t) - c * model.b(t)), y1, model.domain)
    t2 = _solve_increasing(lambda t: float(model.a(t) + c * model.b(t)), yn, model.domain)
    w1 = 1.0 / float(model.da(t1) - c * model.db(t1))
    w2 = 1.0 / float(model.da(t2) + c * model.db(t2))
    if not (w1 > 0 and w2 > 0) or not (math.isfinite(w1) and math.isfinite(w2)):
        raise DegenerateModelError(f"r2 weights must be positive and finite, got w1={w1}, w2={w2}")
    return w1, w2


def gfd_uniform_irregular(model: IrregularUniform, y, variant: str = "r1", grid=None,
                          m: int = 2001) -> GridCurve:
    """Fiducial density for ``Y = a(theta) + b(theta) U``.

    ``r1`` uses the l-infinity Jacobian, whose bracket is
    ``a' - a (log b)' + ybar (log b)'``; ``r2`` uses the weighted extremes
    ``(w1 y_(1) + w2 y_(n))/(w1 + w2)`` in place of ``ybar`` with
    ``w1 = h1'(y_(1))`` and ``w2 = h2'(y_(n))``. The grid defaults to ``m``
    points spanning the feasible interval.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 1:
        raise ParameterError("need at least one observation")
    lo, hi = model.feasible(y)
    t = np.linspace(lo, hi, m) if grid is None else _check_grid(grid)
    if variant == "r1":
        center, scale = float(np.mean(y)), 1.0
    elif variant == "r2":
        w1, w2 = _r2_weights(model, y)
        center, scale = (w1 * float(np.min(y)) + w2 * float(np.max(y))) / (w1 + w2), w1 + w2
    else:
        raise ParameterError(f"variant must be 'r1' or 'r2', got {variant!r}")
    inside = (t >= lo) & (t <= hi)
    tt = np.where(inside, t, 0.5 * (lo + hi))
    with np.errstate(divide="ignore", invalid="ignore"):
        a, da, b, db = (np.asarray(f(tt), dtype=float) for f in (model.a, model.da, model.b, model.db))
        dlogb = db / b
        bracket = scale * (da - a * dlogb + center * dlogb)
        lr = np.log(bracket) - n * np.log(b)
    if np.any(inside & ~(np.abs(db) < da)):
        raise DomainError("the model needs a'(theta) > |b'(theta)| on the grid")
    lr = np.where(inside & np.isfinite(lr), lr, -np.inf)
    return _normalize_log_density(t, lr)


def _normalize_log_density(t: np.ndarray, lr: np.ndarray) -> GridCurve:
    mx = np.max(lr)
    if not np.isfinite(mx):
        raise DegenerateModelError("density is zero on the whole grid")
    w = np.exp(lr - mx)
    z = integrate.simpson(w, x=t)
    if not z > 0:
        raise DegenerateModelError("zero normalizing constant")
    return GridCurve(t, w / z, "linear", 0.0, 0.0)


def reference_prior_u_theta(theta):
    """Reference prior ``(2t-1)/(t(t-1)) exp(psi(2t/(2t-1)))`` for ``U(t, t^2)``, ``t > 1``."""
    t = np.asarray(theta, dtype=float)
    if np.any(t <= 1):
        raise DomainError("the reference prior is defined for theta > 1")
    out = (2 * t - 1) / (t * (t - 1)) * np.exp(digamma(2 * t / (2 * t - 1)))
    return float(out) if out.ndim == 0 else out


def bayes_u_theta(y, prior: str = "flat", m: int = 2001) -> GridCurve:
    """Posterior density for ``U(theta, theta^2)`` under a flat or reference prior."""
    model = u_theta_model()
    y = np.asarray(y, dtype=float).ravel()
    lo, hi = model.feasible(y)
    t = np.linspace(lo, hi, m)
    tt = np.clip(t, np.nextafter(1.0, 2.0), None)
    with np.errstate(divide="ignore"):
        lr = -y.size * np.log(model.b(tt))
    if prior == "reference":
        lr = lr + np.log(reference_prior_u_theta(tt))
    elif prior != "flat":
        raise ParameterError(f"prior must be 'flat' or 'reference', got {prior!r}")
    return _normalize_log_density(t, lr)


# ---------------------------------------------------------------------------
# discrete families: half-corrected GFDs

def gfd_discrete(kind: str, x: int, m: Optional[int] = None, r: Optional[int] = None) -> CD:
    """Half-corrected GFD as an equal two-component mixture.

    ``binomial`` (``m`` trials): Beta(x+1, m-x) and Beta(x, m-x+1).
    ``poisson``: Gamma(x+1, 1) and Gamma(x, 1).
    ``negbinomial`` (``x`` trials to the ``r``-th success): Beta(r, x-r+1) and Beta(r, x-r).
    Zero shape parameters are point masses at the boundary.
    """
    if x != int(x) or x < 0:
        raise ParameterError(f"x must be a nonnegative integer, got {x}")
    x = int(x)
    if kind == "binomial":
        if m is None or m != int(m) or m < 1:
            raise ParameterError("binomial needs an integer number of trials m >= 1")
        if x > m:
            raise ParameterError(f"x={x} exceeds m={m}")
        comps = (Dist.beta(x + 1, m - x), Dist.beta(x, m - x + 1))
        support = (0.0, 1.0)
    elif kind == "poisson":
        comps = (Dist.gamma(x + 1, 1.0), Dist.gamma(x, 1.0))
        support = (0.0, math.inf)
    elif kind == "negbinomial":
        if r is None or r != int(r) or r < 1:
            raise ParameterError("negbinomial needs an integer r >= 1")
        if x < r:
            raise ParameterError(f"x={x} trials cannot contain r={r} successes")
        comps = (Dist.beta(r, x - r + 1), Dist.beta(r, x - r))
        support = (0.0, 1.0)
    else:
        raise ParameterError(f"unknown discrete family {kind!r}")

    def cdf(theta):
        return 0.5 * (comps[0].cdf(theta) + comps[1].cdf(theta))

    def dens(theta):
        th = np.asarray(theta, dtype=float)
        parts = [np.zeros_like(th) if c.point_mass is not None else np.asarray(c.density(th), dtype=float)
                 for c in comps]
        return 0.5 * (parts[0] + parts[1])

    means = [c.point_mass if c.point_mass is not None else _dist_mean(c) for c in comps]
    return CD(cdf, support=support, kind="half_corrected", density=dens,
              center=0.5 * (means[0] + means[1]), scale=0.5 / math.sqrt(x + 1),
              label=f"{kind} half-corrected GFD")


def _dist_mean(d: Dist) -> float:
    if d.kind == "beta":
        a, b = d.params
        return a / (a + b)
    if d.kind == "gamma":
        shape, rate = d.params
        return shape / rate
    raise ParameterError(f"no mean for {d.kind}")


# ---------------------------------------------------------------------------
# fiducial model selection

@dataclass
class ModelCandidate:
    """A candidate model: either a closed-form ``log_integral`` or a grid-evaluable model."""

    label: str
    size: int
    log_integral: Optional[float] = None
    model: Optional[FidModel] = None
    grid: object = None

    def log_i(self, y) -> float:
        if self.log_integral is not None:
            return float(self.log_integral)
        if self.model is None or self.grid is None:
            raise ParameterError(f"candidate {self.label!r} has neither a closed form nor a model and grid")
        return log_integral(self.model, y, self.grid)


JACOBIAN_NORMALIZATIONS = ("linf_mean", "linf", "l2")


def gaussian_linear_log_integral(X, y, jacobian: str = "linf_mean") -> float:
    """``log int f J d(beta, sigma)`` for ``y = X beta + sigma Z`` in closed form.

    ``X`` may have zero columns (the model ``y = sigma Z``). The Jacobian is
    ``D(X, y)/sigma``: ``linf`` sums ``|det [X_s, y_s]|`` over all
    ``(p+1)``-row subsets, ``linf_mean`` averages it over those subsets and
    ``l2`` is ``sqrt(det X^T X * RSS)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float).reshape(n, -1)
    p = X.shape[1]
    if n <= p + 1:
        raise DegenerateModelError(f"need n > p + 1, got n={n}, p={p}")
    if p:
        beta_hat, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ beta_hat
        sign, logdet = np.linalg.slogdet(X.T @ X)
        if sign <= 0:
            raise DegenerateModelError("design matrix is rank deficient")
    else:
        resid, logdet = y, 0.0
    rss = float(resid @ resid)
    if not rss > 0:
        raise DegenerateModelError("residual sum of squares is zero")
    k = n - p
    base = (-0.5 * k * math.log(2 * math.pi) - 0.5 * logdet + math.log(0.5)
            + special.gammaln(k / 2.0) - 0.5 * k * math.log(rss / 2.0))
    if jacobian in ("linf", "linf_mean"):
        D = jacobian_linf(np.column_stack([X, y]))
        if not D > 0:
            raise DegenerateModelError("Jacobian is identically zero")
        logD = math.log(D)
        if jacobian == "linf_mean":
            logD -= math.log(math.comb(n, p + 1))
        return float(base + logD)
    if jacobian == "l2":
        return float(base + 0.5 * logdet + 0.5 * math.log(rss))
    raise ParameterError(f"jacobian must be one of {JACOBIAN_NORMALIZATIONS}, got {jacobian!r}")


def gaussian_linear_candidate(label: str, X, y, jacobian: str = "linf_mean") -> ModelCandidate:
    """Candidate for a Gaussian linear model; its size counts the coefficients and sigma."""
    n = np.asarray(y).size
    p = 0 if X is None else np.asarray(X, dtype=float).reshape(n, -1).shape[1]
    return ModelCandidate(label, p + 1, gaussian_linear_log_integral(X, y, jacobian))


@dataclass
class ModelProbabilities:
    labels: list
    probabilities: np.ndarray
    log_integrals: np.ndarray
    q: float

    def factor(self, i: int, j: int) -> float:
        """Fiducial factor ``r(M_i | y) / r(M_j | y)``."""
        return float(self.probabilities[i] / self.probabilities[j])

    def as_dict(self) -> dict:
        return {lab: float(p) for lab, p in zip(self.labels, self.probabilities)}


def fiducial_model_probabilities(candidates: Sequence[ModelCandidate], y=None,
                                 q: Optional[float] = None) -> ModelProbabilities:
    """``r(M|y) ∝ q^|M| int f_M J_M``; ``q`` defaults to ``n^(-1/2)``."""
    cands = list(candidates)
    if not cands:
        raise ParameterError("need at least one candidate")
    n = None if y is None else np.asarray(y).size
    if q is None:
        if not n:
            raise ParameterError("q defaults to n^(-1/2); pass the data or q")
        q = n ** -0.5
    if not 0 < q <= 1:
        raise ParameterError(f"q must lie in (0, 1], got {q}")
    if n is not None and any(c.size > n for c in cands):
        raise ParameterError("a candidate has more parameters than observations")
    li = np.array([c.log_i(y) for c in cands], dtype=float)
    lw = li + np.array([c.size for c in cands]) * math.log(q)
    mx = np.max(lw)
    if not np.isfinite(mx):
        raise DegenerateModelError("every candidate has a zero fiducial integral")
    w = np.exp(lw - mx)
    return ModelProbabilities([c.label for c in cands], w / np.sum(w), li, float(q))
