"""Combining independent CDs for a common parameter.

A combination rule ``g_c`` maps the vector ``(H_1(theta), ..., H_k(theta))`` to
the real line and ``G_c`` is the distribution function of ``g_c(U_1, ..., U_k)``
for independent uniforms, so that ``H_c = G_c(g_c(H_1, ..., H_k))`` is again
a CD whenever the inputs are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cdcore import CD, GridCurve, cd_quantile
from .errors import DomainError, ParameterError
from .numeric import Dist, RngLike, RngStream, as_generator, norm_cdf

RULES = ("quantile", "fisher", "min", "max", "sum")
EPS = 1e-12
DEFAULT_MC_DRAWS = 100_000
MIN_MC_DRAWS = 10_000
_IRWIN_HALL_MAX_K = 30
_STD_NORMAL = Dist.normal()


@dataclass(frozen=True)
class CombinerSpec:
    """A combination rule and how its null distribution is evaluated.

    Parameters
    ----------
    rule : str
        ``quantile`` (``sum w_i F0^-1(u_i)``), ``fisher`` (``sum log u_i``),
        ``min``, ``max`` or ``sum``.
    f0 : Dist, optional
        Reference distribution for ``quantile``; standard normal by default.
    weights : sequence of float, optional
        Nonnegative weights for ``quantile``; equal weights when omitted.
    gc_mode : str
        ``analytic`` uses a closed form for ``G_c`` where one exists and falls
        back to simulation otherwise; ``monte_carlo`` always simulates.
    mc_draws : int
        Number of simulated ``g_c(U)`` values when simulating.
    rng : RngStream, optional
        Stream for the simulation; seed 0 when omitted.
    reflect : bool
        Combine ``1 - H_i`` instead of ``H_i`` and reflect back. This selects
        which tail of the inputs the rule emphasises (matters for ``fisher``,
        ``min``, ``max``; symmetric rules are unaffected).
    """

    rule: str = "quantile"
    f0: Optional[Dist] = None
    weights: Optional[tuple] = None
    gc_mode: str = "analytic"
    mc_draws: int = DEFAULT_MC_DRAWS
    rng: Optional[RngStream] = None
    reflect: bool = False

    def __post_init__(self):
        if self.rule not in RULES:
            raise ParameterError(f"unknown rule {self.rule!r}; choose from {', '.join(RULES)}")
        if self.gc_mode not in ("analytic", "monte_carlo"):
            raise ParameterError(f"gc_mode must be 'analytic' or 'monte_carlo', got {self.gc_mode!r}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(not math.isfinite(x) or x < 0 for x in w):
                raise ParameterError("weights must be finite and nonnegative")
            if not any(x > 0 for x in w):
                raise ParameterError("at least one weight must be positive")
            object.__setattr__(self, "weights", w)
        if self.f0 is not None and self.f0.is_discrete:
            raise ParameterError("the reference distribution must be continuous")
        if self.mc_draws < MIN_MC_DRAWS and (self.gc_mode == "monte_carlo" or not self.has_closed_form(2)):
            raise ParameterError(f"Monte Carlo G_c needs at least {MIN_MC_DRAWS} draws")

    @property
    def reference(self) -> Dist:
        return self.f0 if self.f0 is not None else _STD_NORMAL

    def weight_vector(self, k: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(k)
        if len(self.weights) != k:
            raise ParameterError(f"got {len(self.weights)} weights for {k} inputs")
        return np.asarray(self.weights, dtype=float)

    def has_closed_form(self, k: int) -> bool:
        if self.rule == "quantile":
            return self.reference.kind == "normal"
        if self.rule == "sum":
            return k <= _IRWIN_HALL_MAX_K
        return True


def gc_apply(u, spec: CombinerSpec) -> np.ndarray:
    """Apply ``g_c`` along the last axis of ``u`` (values clamped to ``[eps, 1-eps]``)."""
    u = np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)
    k = u.shape[-1]
    if spec.rule == "quantile":
        w = spec.weight_vector(k)
        out = np.sum(w * np.asarray(spec.reference.quantile(u), dtype=float), axis=-1)
    elif spec.rule == "fisher":
        out = np.sum(np.log(u), axis=-1)
    elif spec.rule == "min":
        out = np.min(u, axis=-1)
    elif spec.rule == "max":
        out = np.max(u, axis=-1)
    else:
        out = np.sum(u, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def irwin_hall_cdf(t, k: int) -> np.ndarray:
    """CDF of the sum of ``k`` independent uniforms, by the alternating sum."""
    t = np.asarray(t, dtype=float)
    # reflect the upper half to keep the alternating sum short
    s = np.where(t > k / 2.0, k - t, t)
    s = np.clip(s, 0.0, k / 2.0)
    acc = np.zeros_like(s)
    for j in range(int(math.floor(k / 2.0)) + 1):
        term = (-1) ** j * math.comb(k, j) * np.where(s > j, (s - j), 0.0) ** k
        acc = acc + term
    acc = acc / math.factorial(k)
    out = np.where(t > k / 2.0, 1.0 - acc, acc)
    return np.clip(np.where(t <= 0, 0.0, np.where(t >= k, 1.0, out)), 0.0, 1.0)


class MonteCarloGc:
    """Empirical ``G_c`` from a sorted sample of ``g_c(U)``; answers queries by binary search."""

    def __init__(self, spec: CombinerSpec, k: int, draws: Optional[int] = None, rng: RngLike = None):
        m = int(draws or spec.mc_draws)
        if m < MIN_MC_DRAWS:
            raise ParameterError(f"Monte Carlo G_c needs at least {MIN_MC_DRAWS} draws")
        gen = as_generator(rng if rng is not None else (spec.rng or RngStream(0)))
        u = gen.random((m, k))
        self.sample = np.sort(gc_apply(u, spec))
        self.m = m

    def __call__(self, t):
        return np.searchsorted(self.sample, np.asarray(t, dtype=float), side="right") / self.m

    def standard_error(self, t):
        p = self(t)
        return np.sqrt(p * (1 - p) / self.m)


def gc_cdf(t, spec: CombinerSpec, k: int, mc: Optional[MonteCarloGc] = None):
    """``G_c(t) = P(g_c(U_1..U_k) <= t)``."""
    if k < 1:
        raise ParameterError("need at least one input")
    t = np.asarray(t, dtype=float)
    if spec.gc_mode == "analytic" and spec.has_closed_form(k):
        if spec.rule == "quantile":
            w = spec.weight_vector(k)
            out = norm_cdf(t / math.sqrt(float(np.sum(w * w))))
        elif spec.rule == "fisher":
            # P(sum log U <= t) = P(chi2(2k) >= -2t)
            chi = Dist.chi_square(2 * k)
            out = np.where(t >= 0, 1.0, chi.sf(-2.0 * np.minimum(t, 0.0)))
        elif spec.rule == "min":
            tt = np.clip(t, 0.0, 1.0)
            out = 1.0 - (1.0 - tt) ** k
        elif spec.rule == "max":
            out = np.clip(t, 0.0, 1.0) ** k
        else:
            out = irwin_hall_cdf(t, k)
    else:
        mc = mc or MonteCarloGc(spec, k)
        out = mc(t)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _support_intersection(cds: Sequence[CD]) -> tuple:
    lo = max(cd.support[0] for cd in cds)
    hi = min(cd.support[1] for cd in cds)
    if not lo < hi:
        raise DomainError("input CDs have disjoint supports; they cannot share a parameter")
    return lo, hi


def default_combine_grid(cds: Sequence[CD], m: int = 2001, lo_q: float = 0.0005,
                         hi_q: float = 0.9995) -> np.ndarray:
    """Grid spanning the union of the inputs' central quantile ranges."""
    lo_s, hi_s = _support_intersection(cds)
    a = min(cd_quantile(cd, lo_q) for cd in cds)
    b = max(cd_quantile(cd, hi_q) for cd in cds)
    a, b = max(a, lo_s), min(b, hi_s)
    if not a < b:
        a, b = a - 1.0, b + 1.0
    return np.linspace(a, b, m)


def combine(cds: Sequence[CD], spec: Optional[CombinerSpec] = None, grid=None,
            label: str = "combined CD") -> CD:
    """Combined CD ``G_c(g_c(H_1, ..., H_k))`` on a grid."""
    cds = list(cds)
    if not cds:
        raise ParameterError("need at least one CD to combine")
    spec = spec or CombinerSpec()
    k = len(cds)
    spec.weight_vector(k)
    lo_s, hi_s = _support_intersection(cds)
    t = default_combine_grid(cds) if grid is None else np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ParameterError("grid must be a strictly increasing 1-d array")
    if t[0] < lo_s or t[-1] > hi_s:
        raise DomainError(f"grid [{t[0]}, {t[-1]}] leaves the common support ({lo_s}, {hi_s})")
    H = np.column_stack([np.asarray(cd.eval(t), dtype=float) for cd in cds])
    if spec.reflect:
        H = 1.0 - H
    mc = None
    if not (spec.gc_mode == "analytic" and spec.has_closed_form(k)):
        mc = MonteCarloGc(spec, k)
    vals = np.asarray(gc_cdf(gc_apply(H, spec), spec, k, mc), dtype=float)
    if spec.reflect:
        vals = 1.0 - vals
    # every g_c here is coordinatewise nondecreasing; this only removes rounding jitter
    vals = np.maximum.accumulate(np.clip(vals, 0.0, 1.0))
    exact = mc is None and all(cd.kind == "exact" for cd in cds)
    curve = GridCurve(t, vals, "linear")
    return CD.from_grid(curve, kind="exact" if exact else "asymptotic", label=label,
                        support=(lo_s, hi_s))


# ---------------------------------------------------------------------------
# weight presets

def sqrt_n_weights(ns: Sequence[int]) -> tuple:
    ns = [int(n) for n in ns]
    if any(n < 1 for n in ns):
        raise ParameterError("sample sizes must be positive")
    return tuple(math.sqrt(n) for n in ns)


def inverse_variance_weights(cds: Sequence[CD], f0: Optional[Dist] = None, q: float = 0.8413447460685429) -> tuple:
    """Weights ``1/s_i`` where ``s_i`` is each CD's spread on the ``F0`` scale.

    For CDs of the form ``F0((theta - c_i)/s_i)`` the quantile rule with these
    weights reproduces inverse-variance pooling of the ``c_i``.
    """
    f0 = f0 or Dist.normal()
    span0 = float(f0.quantile(q)) - float(f0.quantile(1 - q))
    out = []
    for cd in cds:
        s = (cd_quantile(cd, q) - cd_quantile(cd, 1 - q)) / span0
        if not s > 0:
            raise ParameterError("a CD with zero spread cannot be weighted")
        out.append(1.0 / s)
    return tuple(out)
