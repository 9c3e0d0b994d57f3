"""Distribution catalog, seeded random streams and special functions.

The catalog wraps ``scipy.stats`` behind a small value type, :class:`Dist`, so
the rest of the package never touches scipy's frozen-distribution objects
directly. Degenerate Beta/Gamma members are carried as explicit point masses:
``Beta(0, b)`` and ``Gamma(0, rate)`` sit at 0, ``Beta(a, 0)`` sits at 1.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError, ParameterError

RNG_ALGORITHM = "numpy.PCG64 seeded by SeedSequence(seed, spawn_key=(stream_id, *path))"

CONTINUOUS = frozenset(
    {"normal", "student_t", "chi_square", "fisher_f", "beta", "gamma", "uniform"}
)
DISCRETE = frozenset({"binomial", "poisson", "negbinomial"})

_QUANTILE_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """A reproducible, splittable random stream.

    Equal ``(seed, stream_id, path)`` always give bit-identical sequences;
    different ids or paths give independent sequences (SeedSequence spawn keys).
    """

    seed: int
    stream_id: int = 0
    path: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(i),))

    @property
    def algorithm(self) -> str:
        return RNG_ALGORITHM


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None:
        raise ParameterError("a random stream is required")
    return RngStream(int(rng)).generator()


@dataclass(frozen=True)
class Dist:
    """A member of the distribution catalog.

    Parameters follow the natural order of each family:
    ``normal(mean, sd)``, ``student_t(df)``, ``chi_square(df)``,
    ``fisher_f(df1, df2)``, ``beta(a, b)``, ``gamma(shape, rate)``,
    ``uniform(lo, hi)``, ``binomial(n, p)``, ``poisson(rate)`` and
    ``negbinomial(r, p)``. The negative binomial counts *trials* up to and
    including the r-th success, so its support starts at ``r``.
    """

    kind: str
    params: tuple
    _frozen: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        _validate(self.kind, self.params)
        object.__setattr__(self, "_frozen", _freeze(self.kind, self.params))

    # constructors -----------------------------------------------------
    @classmethod
    def normal(cls, mean=0.0, sd=1.0):
        return cls("normal", (float(mean), float(sd)))

    @classmethod
    def student_t(cls, df):
        return cls("student_t", (float(df),))

    @classmethod
    def chi_square(cls, df):
        return cls("chi_square", (float(df),))

    @classmethod
    def fisher_f(cls, df1, df2):
        return cls("fisher_f", (float(df1), float(df2)))

    @classmethod
    def beta(cls, a, b):
        return cls("beta", (float(a), float(b)))

    @classmethod
    def gamma(cls, shape, rate=1.0):
        return cls("gamma", (float(shape), float(rate)))

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def binomial(cls, n, p):
        return cls("binomial", (int(n), float(p)))

    @classmethod
    def poisson(cls, rate):
        return cls("poisson", (float(rate),))

    @classmethod
    def negbinomial(cls, r, p):
        return cls("negbinomial", (int(r), float(p)))

    # properties -------------------------------------------------------
    @property
    def is_discrete(self) -> bool:
        return self.kind in DISCRETE

    @property
    def point_mass(self):
        """Location of the atom for degenerate members, else ``None``."""
        if self.kind == "beta":
            a, b = self.params
            if a == 0:
                return 0.0
            if b == 0:
                return 1.0
        if self.kind == "gamma" and self.params[0] == 0:
            return 0.0
        return None

    @property
    def support(self) -> tuple:
        k, p = self.kind, self.params
        if self.point_mass is not None:
            return (self.point_mass, self.point_mass)
        if k in ("normal", "student_t"):
            return (-math.inf, math.inf)
        if k in ("chi_square", "fisher_f", "gamma"):
            return (0.0, math.inf)
        if k == "beta":
            return (0.0, 1.0)
        if k == "uniform":
            return p
        if k == "binomial":
            return (0, p[0])
        if k == "poisson":
            return (0, math.inf)
        return (p[0], math.inf)

    # evaluation -------------------------------------------------------
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        atom = self.point_mass
        if atom is not None:
            return _scalar(np.where(x >= atom, 1.0, 0.0))
        return _scalar(np.clip(self._frozen.cdf(x), 0.0, 1.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        atom = self.point_mass
        if atom is not None:
            return _scalar(np.where(x >= atom, 0.0, 1.0))
        return _scalar(np.clip(self._frozen.sf(x), 0.0, 1.0))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        atom = self.point_mass
        if atom is not None:
            return _scalar(np.where(x == atom, np.inf, 0.0))
        if self.is_discrete:
            return _scalar(self._frozen.pmf(x))
        return _scalar(self._frozen.pdf(x))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.point_mass is not None:
            return _scalar(np.where(x == self.point_mass, np.inf, -np.inf))
        if self.is_discrete:
            return _scalar(self._frozen.logpmf(x))
        return _scalar(self._frozen.logpdf(x))

    def quantile(self, p):
        p_arr = np.asarray(p, dtype=float)
        if self.is_discrete:
            if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
                raise DomainError(f"quantile level must lie in [0, 1], got {p}")
            lo = self.support[0]
            out = np.where(p_arr <= 0, lo, self._frozen.ppf(np.clip(p_arr, 0, 1)))
            return _scalar(out)
        if np.any((p_arr <= 0) | (p_arr >= 1)) or np.any(np.isnan(p_arr)):
            raise DomainError(f"quantile level must lie in (0, 1), got {p}")
        if self.point_mass is not None:
            return _scalar(np.full(p_arr.shape, self.point_mass))
        q = np.asarray(self._frozen.ppf(p_arr), dtype=float)
        flat = q.reshape(-1).copy()
        pf = np.broadcast_to(p_arr, q.shape).reshape(-1)
        with np.errstate(invalid="ignore"):
            resid = np.abs(np.asarray(self._frozen.cdf(flat), dtype=float) - pf)
        for i in np.flatnonzero(~np.isfinite(flat) | ~(resid <= _QUANTILE_TOL)):
            flat[i] = self._polish(pf[i], flat[i])
        return _scalar(flat.reshape(q.shape))

    def _polish(self, p: float, guess: float) -> float:
        """Bracketed root refinement of ``cdf(x) = p`` around ``guess``."""
        lo_s, hi_s = self.support
        g = guess if np.isfinite(guess) else (0.0 if not np.isfinite(lo_s) else lo_s + 1.0)
        step = max(1.0, abs(g)) * 1e-3
        lo, hi = g - step, g + step
        for _ in range(200):
            lo_c = max(lo, lo_s) if np.isfinite(lo_s) else lo
            if self._frozen.cdf(lo_c) <= p:
                break
            lo = g - 2 * (g - lo)
        for _ in range(200):
            hi_c = min(hi, hi_s) if np.isfinite(hi_s) else hi
            if self._frozen.cdf(hi_c) >= p:
                break
            hi = g + 2 * (hi - g)
        lo = max(lo, lo_s) if np.isfinite(lo_s) else lo
        hi = min(hi, hi_s) if np.isfinite(hi_s) else hi
        f = lambda x: float(self._frozen.cdf(x)) - p
        if f(lo) * f(hi) > 0:
            return guess
        x = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        # brentq stops within a few ulps; finish at the smallest float with cdf >= p
        for _ in range(64):
            if f(x) >= 0 or x >= hi:
                break
            x = np.nextafter(x, np.inf)
        for _ in range(64):
            down = np.nextafter(x, -np.inf)
            if down < lo or f(down) < 0:
                break
            x = down
        return float(x)

    def sample(self, rng: RngLike, m: int):
        if m < 1:
            raise ParameterError("sample size must be at least 1")
        gen = as_generator(rng)
        atom = self.point_mass
        if atom is not None:
            return np.full(m, atom)
        k, p = self.kind, self.params
        if k == "normal":
            return gen.normal(p[0], p[1], m)
        if k == "student_t":
            return gen.standard_t(p[0], m)
        if k == "chi_square":
            return gen.chisquare(p[0], m)
        if k == "fisher_f":
            return gen.f(p[0], p[1], m)
        if k == "beta":
            return gen.beta(p[0], p[1], m)
        if k == "gamma":
            return gen.gamma(p[0], 1.0 / p[1], m)
        if k == "uniform":
            return gen.uniform(p[0], p[1], m)
        if k == "binomial":
            return gen.binomial(p[0], p[1], m).astype(float)
        if k == "poisson":
            return gen.poisson(p[0], m).astype(float)
        return (p[0] + gen.negative_binomial(p[0], p[1], m)).astype(float)


def _scalar(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


def _validate(kind, params):
    def need(cond, msg):
        if not cond:
            raise ParameterError(f"{kind}{params}: {msg}")

    arity = {"normal": 2, "student_t": 1, "chi_square": 1, "fisher_f": 2, "beta": 2,
             "gamma": 2, "uniform": 2, "binomial": 2, "poisson": 1, "negbinomial": 2}
    if kind not in arity:
        raise ParameterError(f"unknown distribution kind {kind!r}")
    need(len(params) == arity[kind], f"expected {arity[kind]} parameters")
    need(all(np.isfinite(v) for v in params), "parameters must be finite")
    if kind == "normal":
        need(params[1] > 0, "sd must be positive")
    elif kind in ("student_t", "chi_square"):
        need(params[0] > 0, "df must be positive")
    elif kind == "fisher_f":
        need(params[0] > 0 and params[1] > 0, "degrees of freedom must be positive")
    elif kind == "beta":
        a, b = params
        need(a >= 0 and b >= 0, "shape parameters must be non-negative")
        need(not (a == 0 and b == 0), "Beta(0, 0) is not a declared point mass")
    elif kind == "gamma":
        need(params[0] >= 0, "shape must be non-negative")
        need(params[1] > 0, "rate must be positive")
    elif kind == "uniform":
        need(params[0] < params[1], "need lo < hi")
    elif kind == "binomial":
        need(params[0] >= 0, "n must be non-negative")
        need(0 <= params[1] <= 1, "p must lie in [0, 1]")
    elif kind == "poisson":
        need(params[0] >= 0, "rate must be non-negative")
    elif kind == "negbinomial":
        need(params[0] >= 1, "r must be at least 1")
        need(0 < params[1] <= 1, "p must lie in (0, 1]")


@functools.lru_cache(maxsize=4096)
def _freeze(kind, p):
    # frozen scipy objects are immutable and costly to build, so share them
    if kind == "normal":
        return stats.norm(p[0], p[1])
    if kind == "student_t":
        return stats.t(p[0])
    if kind == "chi_square":
        return stats.chi2(p[0])
    if kind == "fisher_f":
        return stats.f(p[0], p[1])
    if kind == "beta":
        return None if 0 in p else stats.beta(p[0], p[1])
    if kind == "gamma":
        return None if p[0] == 0 else stats.gamma(p[0], scale=1.0 / p[1])
    if kind == "uniform":
        return stats.uniform(p[0], p[1] - p[0])
    if kind == "binomial":
        return stats.binom(p[0], p[1])
    if kind == "poisson":
        return stats.poisson(p[0])
    return stats.nbinom(p[0], p[1], loc=p[0])


# module-level verbs ----------------------------------------------------

def cdf(d: Dist, x):
    return d.cdf(x)


def quantile(d: Dist, p):
    return d.quantile(p)


def density(d: Dist, x):
    return d.density(x)


def sample(d: Dist, rng: RngLike, m: int):
    return d.sample(rng, m)


def digamma(z):
    """Logarithmic derivative of the gamma function, for ``z > 0``."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(~(z_arr > 0)):
        raise DomainError(f"digamma is defined here only for z > 0, got {z}")
    return _scalar(special.digamma(z_arr))


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(p):
    return special.ndtri(p)
