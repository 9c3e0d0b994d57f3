"""Confidence distributions and the inference derived from them.

A :class:`CD` is an evaluable, sample-dependent distribution function on the
parameter space. Everything else here (confidence curves, quantiles,
intervals, p-values, point estimates) is generic over that one object.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DomainError,
    InsufficientSampleError,
    NumericalError,
    ParameterError,
    UnsupportedOperationError,
)
from .numeric import RngLike, RngStream, as_generator

KINDS = ("exact", "asymptotic", "upper", "lower", "half_corrected")

_BRACKET_DOUBLINGS = 60
_MIN_DRAWS = 50


@dataclass(frozen=True, eq=False)
class GridCurve:
    """A curve known on a strictly increasing grid.

    ``left``/``right`` are the values returned outside the grid; ``None``
    means clamp to the end values.
    """

    thetas: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"
    left: Optional[float] = None
    right: Optional[float] = None

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise ParameterError("grid thetas and values must be equal-length 1-d arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("grid thetas must be strictly increasing")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(t)):
            raise ParameterError("grid values must be finite")
        if self.interpolation not in ("linear", "step"):
            raise ParameterError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.thetas.size

    def __call__(self, theta):
        x = np.asarray(theta, dtype=float)
        t, v = self.thetas, self.values
        lo = v[0] if self.left is None else self.left
        hi = v[-1] if self.right is None else self.right
        if self.interpolation == "linear":
            out = np.interp(x, t, v, left=lo, right=hi)
            if self.left is not None:
                out = np.where(x < t[0], lo, out)
        else:
            idx = np.searchsorted(t, x, side="right") - 1
            out = np.where(idx < 0, lo, v[np.clip(idx, 0, t.size - 1)])
            if self.right is not None:
                out = np.where(x > t[-1], hi, out)
        return float(out) if out.ndim == 0 else out

    def integral(self) -> float:
        if self.interpolation == "linear":
            return float(integrate.trapezoid(self.values, self.thetas))
        return float(np.sum(self.values[:-1] * np.diff(self.thetas)))

    def sample(self, rng: RngLike, m: int) -> np.ndarray:
        """Inverse-transform draws treating the curve as a (possibly unnormalised) density."""
        gen = as_generator(rng)
        t, v = self.thetas, np.clip(self.values, 0, None)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
        if cum[-1] <= 0:
            raise NumericalError("curve has no mass to sample from")
        cum /= cum[-1]
        u = gen.random(m)
        i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, t.size - 2)
        # exact inversion of the piecewise-linear density within each cell
        h = t[i + 1] - t[i]
        d0, d1 = v[i], v[i + 1]
        mass = cum[i + 1] - cum[i]
        frac = np.divide(u - cum[i], mass, out=np.zeros_like(u), where=mass > 0)
        slope = d1 - d0
        with np.errstate(divide="ignore", invalid="ignore"):
            quad = np.where(
                np.abs(slope) > 1e-12 * np.maximum(d0, 1e-300),
                (-d0 + np.sqrt(d0 * d0 + frac * slope * (d0 + d1))) / slope,
                frac,
            )
        return t[i] + np.clip(np.nan_to_num(quad, nan=0.5), 0, 1) * h


@dataclass(frozen=True)
class CInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if not (0 < self.level < 1):
            raise ParameterError(f"level must lie in (0, 1), got {self.level}")
        if self.lower > self.upper:
            raise NumericalError(f"interval endpoints out of order: {self.lower} > {self.upper}")

    def contains(self, theta: float) -> bool:
        return self.lower <= theta <= self.upper

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def as_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "level": self.level}


class CD:
    """A confidence distribution ``theta -> H(theta)``.

    Parameters
    ----------
    cdf : callable
        Vectorised map from parameter values to ``[0, 1]``.
    support : (lo, hi)
        Parameter support; either end may be infinite.
    kind : str
        One of ``exact``, ``asymptotic``, ``upper``, ``lower``, ``half_corrected``.
    monotone : bool
        Whether ``cdf`` is nondecreasing. Quantile-based inference refuses
        non-monotone CDs.
    density : callable, optional
        Confidence density ``h = dH/dtheta``.
    ppf : callable, optional
        Closed-form inverse; used in place of numerical root finding.
    center, scale : float, optional
        Hints for the root-finding bracket.
    grid : GridCurve, optional
        Set for CDs that are only known on a grid.
    """

    def __init__(
        self,
        cdf: Callable,
        support=(-math.inf, math.inf),
        kind: str = "exact",
        monotone: bool = True,
        density: Optional[Callable] = None,
        ppf: Optional[Callable] = None,
        center: Optional[float] = None,
        scale: Optional[float] = None,
        grid: Optional[GridCurve] = None,
        density_grid: Optional[GridCurve] = None,
        label: str = "",
    ):
        if kind not in KINDS:
            raise ParameterError(f"unknown CD kind {kind!r}")
        lo, hi = float(support[0]), float(support[1])
        if not lo < hi:
            raise ParameterError(f"empty support {support}")
        self._cdf = cdf
        self.support = (lo, hi)
        self.kind = kind
        self.monotone = bool(monotone)
        self.density_eval = density
        self.ppf = ppf
        self.center = center
        self.scale = scale
        self.grid = grid
        self.density_grid = density_grid
        self.label = label

    def __repr__(self):
        name = self.label or "CD"
        return f"<{name} kind={self.kind} support={self.support}>"

    def __call__(self, theta):
        return self.eval(theta)

    def eval(self, theta):
        out = np.clip(np.asarray(self._cdf(np.asarray(theta, dtype=float)), dtype=float), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def density(self, theta):
        if self.density_eval is not None:
            out = np.asarray(self.density_eval(np.asarray(theta, dtype=float)), dtype=float)
        elif self.density_grid is not None:
            out = np.asarray(self.density_grid(theta), dtype=float)
        else:
            raise UnsupportedOperationError("this CD carries no confidence density")
        return float(out) if out.ndim == 0 else out

    @property
    def has_density(self) -> bool:
        return self.density_eval is not None or self.density_grid is not None

    def in_support(self, theta) -> bool:
        lo, hi = self.support
        x = np.asarray(theta, dtype=float)
        return bool(np.all((x >= lo) & (x <= hi)))

    @classmethod
    def from_grid(cls, curve: GridCurve, kind: str = "asymptotic", monotone: bool = True,
                  clean: bool = False, label: str = "", support=None) -> "CD":
        """Wrap a grid of CD values; ``clean`` applies isotonic regression first."""
        values = np.clip(curve.values, 0.0, 1.0)
        if clean:
            values = isotonic(values)
        curve = GridCurve(curve.thetas, values, curve.interpolation, curve.left, curve.right)
        dens = GridCurve(curve.thetas, _grid_density(curve), "linear", 0.0, 0.0) if len(curve) > 1 else None
        if support is None:
            support = (-math.inf, math.inf)
        return cls(curve, support=support, kind=kind, monotone=monotone, grid=curve,
                   density_grid=dens, label=label)


def _grid_density(curve: GridCurve) -> np.ndarray:
    t, v = curve.thetas, curve.values
    if t.size < 2:
        return np.zeros_like(v)
    return np.clip(np.gradient(v, t), 0.0, None)


def isotonic(values: Sequence[float], weights=None) -> np.ndarray:
    """Pool-adjacent-violators fit of a nondecreasing sequence."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return v.copy()
    res = optimize.isotonic_regression(v, weights=weights, increasing=True)
    return np.asarray(res.x, dtype=float)


# ---------------------------------------------------------------------------
# curve-level inference

def _check_support(cd: CD, theta) -> None:
    if not cd.in_support(theta):
        raise DomainError(f"theta={theta} lies outside the CD support {cd.support}")


def confidence_curve(cd: CD, theta):
    _check_support(cd, theta)
    h = np.asarray(cd.eval(theta))
    out = 2.0 * np.minimum(h, 1.0 - h)
    return float(out) if out.ndim == 0 else out


def _require_monotone(cd: CD) -> None:
    if not cd.monotone:
        raise UnsupportedOperationError(
            "quantile-based inference needs a monotone CD; use level_set() instead"
        )


def cd_quantile(cd: CD, p: float) -> float:
    """Leftmost ``theta`` with ``H(theta) >= p``."""
    _require_monotone(cd)
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    if cd.ppf is not None:
        return float(cd.ppf(p))
    if cd.grid is not None:
        return _grid_quantile(cd.grid, p)
    return _bisect_quantile(cd, p)


def _grid_quantile(curve: GridCurve, p: float) -> float:
    t, v = curve.thetas, np.clip(curve.values, 0, 1)
    left = v[0] if curve.left is None else curve.left
    if left >= p:
        return float(t[0])
    idx = int(np.searchsorted(v, p, side="left"))
    if idx >= t.size:
        right = v[-1] if curve.right is None else curve.right
        if right >= p:
            return float(t[-1])
        raise NumericalError(f"grid CD never reaches level {p}")
    if curve.interpolation == "step" or idx == 0:
        return float(t[idx])
    v0, v1 = v[idx - 1], v[idx]
    if v1 <= v0:
        return float(t[idx])
    return float(t[idx - 1] + (p - v0) / (v1 - v0) * (t[idx] - t[idx - 1]))


def _bracket(cd: CD, p: float) -> tuple:
    lo_s, hi_s = cd.support
    c = cd.center
    if c is None or not np.isfinite(c):
        if np.isfinite(lo_s) and np.isfinite(hi_s):
            c = 0.5 * (lo_s + hi_s)
        elif np.isfinite(lo_s):
            c = lo_s + 1.0
        elif np.isfinite(hi_s):
            c = hi_s - 1.0
        else:
            c = 0.0
    s = cd.scale if cd.scale and cd.scale > 0 else 1.0

    def below(k):
        return lo_s + (c - lo_s) / 2.0 ** (k + 1) if np.isfinite(lo_s) else c - s * 2.0 ** k

    def above(k):
        return hi_s - (hi_s - c) / 2.0 ** (k + 1) if np.isfinite(hi_s) else c + s * 2.0 ** k

    lo = None
    for k in range(_BRACKET_DOUBLINGS):
        x = below(k)
        if cd.eval(x) < p:
            lo = x
            break
    hi = None
    for k in range(_BRACKET_DOUBLINGS):
        x = above(k)
        if cd.eval(x) >= p:
            hi = x
            break
    if hi is None:
        if np.isfinite(hi_s) and cd.eval(hi_s) >= p:
            hi = hi_s
        else:
            raise NumericalError(f"could not bracket the {p}-quantile")
    if lo is None:
        if np.isfinite(lo_s):
            return lo_s, hi, True
        raise NumericalError(f"could not bracket the {p}-quantile")
    return lo, hi, False


def _bisect_quantile(cd: CD, p: float) -> float:
    lo, hi, at_edge = _bracket(cd, p)
    if at_edge:
        try:
            if cd.eval(lo) >= p:
                return lo
        except (ArithmeticError, ValueError):
            pass
    # invariant: H(lo) < p <= H(hi); stops when lo and hi are adjacent doubles
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cd.eval(mid) >= p:
            hi = mid
        else:
            lo = mid
    return float(hi)


def interval(cd: CD, level: float, side: str = "two") -> CInterval:
    """Equal-tailed (``two``) or one-sided confidence interval.

    ``lower`` gives ``[H^-1(alpha), hi)``; ``upper`` gives ``(lo, H^-1(1-alpha)]``
    where ``lo``/``hi`` are the support ends.
    """
    if not (0 < level < 1):
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    alpha = 1.0 - level
    lo_s, hi_s = cd.support
    if side == "two":
        return CInterval(cd_quantile(cd, alpha / 2), cd_quantile(cd, 1 - alpha / 2), level)
    if side == "lower":
        return CInterval(cd_quantile(cd, alpha), hi_s, level)
    if side == "upper":
        return CInterval(lo_s, cd_quantile(cd, 1 - alpha), level)
    raise ParameterError(f"side must be 'two', 'lower' or 'upper', got {side!r}")


def level_set(cd: CD, level: float, grid: Iterable[float]) -> list:
    """Confidence set on a grid as a list of ``(lo, hi)`` runs.

    Works for non-monotone CDs. Upper CDs use ``{H <= level}``, lower CDs use
    ``{H >= 1 - level}``, every other kind the two-sided ``{CV >= 1 - level}``.
    """
    t = np.asarray(list(grid), dtype=float)
    h = np.asarray(cd.eval(t), dtype=float)
    if cd.kind == "upper":
        mask = h <= level
    elif cd.kind == "lower":
        mask = h >= 1.0 - level
    else:
        mask = 2.0 * np.minimum(h, 1.0 - h) >= 1.0 - level
    runs, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        if not m and start is not None:
            runs.append((float(t[start]), float(t[i - 1])))
            start = None
    if start is not None:
        runs.append((float(t[start]), float(t[-1])))
    return runs


def p_value_one_sided(cd: CD, b: float, null_side: str = "le") -> float:
    """Support ``H(C)`` of the null ``theta <= b`` (``le``) or ``theta >= b`` (``ge``)."""
    _check_support(cd, b)
    h = cd.eval(b)
    if null_side == "le":
        return float(h)
    if null_side == "ge":
        return float(1.0 - h)
    raise ParameterError(f"null_side must be 'le' or 'ge', got {null_side!r}")


def p_value_two_sided(cd: CD, b: float) -> float:
    return float(confidence_curve(cd, b))


# ---------------------------------------------------------------------------
# point estimators

def point_estimate(cd: CD, which: str = "median") -> float:
    if which == "median":
        return cd_quantile(cd, 0.5)
    if which == "mean":
        return _cd_mean(cd)
    if which == "mode":
        return _cd_mode(cd)
    raise ParameterError(f"unknown point estimator {which!r}")


def _cd_mean(cd: CD) -> float:
    if cd.grid is not None:
        g = cd.grid
        v = np.clip(g.values, 0, 1)
        first = v[0] if g.left is None else v[0] - g.left
        if g.interpolation == "step":
            inc = np.diff(np.concatenate([[v[0] - first], v]))
            return float(np.sum(g.thetas * inc) / max(np.sum(inc), 1e-300))
        mids = 0.5 * (g.thetas[1:] + g.thetas[:-1])
        inc = np.diff(v)
        total = first + np.sum(inc)
        return float((first * g.thetas[0] + np.sum(mids * inc)) / total)
    if cd.density_eval is None:
        raise UnsupportedOperationError("the mean estimator needs a confidence density")
    lo_s, hi_s = cd.support
    f = lambda x: x * cd.density_eval(x)
    if cd.monotone:
        levels = (1e-10, 1e-4, 0.01, 0.1, 0.5, 0.9, 0.99, 1 - 1e-4, 1 - 1e-10)
        pts = sorted({cd_quantile(cd, q) for q in levels})
    else:
        pts = []
    knots = [lo_s] + [p for p in pts if lo_s < p < hi_s] + [hi_s]
    total, err = 0.0, 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if a == b:
            continue
        val, e, *rest = integrate.quad(f, a, b, epsabs=1e-11, epsrel=1e-10, limit=200,
                                       full_output=1)
        if len(rest) >= 2 and rest[0] not in (None, 0) and not np.isfinite(val):
            raise NumericalError("mean integral did not converge")
        total += val
        err += e
    if not np.isfinite(total) or err > 1e-6 * max(1.0, abs(total)):
        raise NumericalError("mean integral did not converge (is the CD mean finite?)")
    return float(total)


def _cd_mode(cd: CD) -> float:
    if cd.density_eval is None:
        if cd.density_grid is None:
            raise UnsupportedOperationError("the mode estimator needs a confidence density")
        g = cd.density_grid
        return float(g.thetas[int(np.argmax(g.values))])
    lo_s, hi_s = cd.support
    if cd.monotone:
        a, b = cd_quantile(cd, 1e-6), cd_quantile(cd, 1 - 1e-6)
    elif np.isfinite(lo_s) and np.isfinite(hi_s):
        a, b = lo_s, hi_s
    else:
        raise UnsupportedOperationError("mode search needs a monotone CD or a bounded support")
    xs = np.linspace(a, b, 2001)
    hs = np.asarray(cd.density_eval(xs), dtype=float)
    i = int(np.argmax(hs))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    if hi <= lo:
        return float(xs[i])
    res = optimize.minimize_scalar(lambda x: -float(cd.density_eval(x)), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-12 * max(1.0, abs(xs[i]))})
    return float(res.x) if -res.fun >= hs[i] else float(xs[i])


# ---------------------------------------------------------------------------
# grid CDs from Monte Carlo draws

def cd_from_draws(draws, interpolation: str = "step", kind: str = "asymptotic",
                  label: str = "") -> CD:
    """Empirical CDF of draws (``step``) or its linear interpolant (``linear``)."""
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < _MIN_DRAWS:
        raise InsufficientSampleError(f"need at least {_MIN_DRAWS} draws, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("draws must be finite")
    uniq, counts = np.unique(x, return_counts=True)
    values = np.cumsum(counts) / x.size
    curve = GridCurve(uniq, values, interpolation, left=0.0, right=1.0)
    cd = CD.from_grid(curve, kind=kind, label=label or "draws CD")
    return cd


# ---------------------------------------------------------------------------
# frequentist calibration by simulation

@dataclass
class DominanceReport:
    t: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray
    kind: str
    reps: int
    h_values: np.ndarray = field(repr=False)
    violations: list = field(default_factory=list)

    @property
    def max_abs_dev(self) -> float:
        return float(np.max(np.abs(self.p_hat - self.t)))

    @property
    def max_shortfall(self) -> float:
        """Largest ``t - P(H <= t)``; should be <= 0 (up to noise) for upper CDs."""
        return float(np.max(self.t - self.p_hat))

    @property
    def max_excess(self) -> float:
        """Largest ``P(H <= t) - t``; should be <= 0 (up to noise) for lower CDs."""
        return float(np.max(self.p_hat - self.t))


def stochastic_dominance_check(cd_builder: Callable, simulate: Callable, theta0: float,
                               reps: int, rng: RngStream, t_grid=None,
                               kind: Optional[str] = None) -> DominanceReport:
    """Empirical ``P(H(theta0) <= t)`` over replicated data sets.

    ``simulate(gen)`` draws one data set at ``theta0`` from a numpy Generator and
    ``cd_builder(data)`` turns it into a CD. Each replication gets its own
    child stream of ``rng``. Violations are grid points where the estimate is
    more than 3 standard errors on the wrong side of ``t`` for the CD's kind.
    """
    if reps < 1:
        raise ParameterError("reps must be positive")
    base = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    t = np.linspace(0.01, 0.99, 99) if t_grid is None else np.asarray(t_grid, dtype=float)
    h = np.empty(reps)
    for i in range(reps):
        cd = cd_builder(simulate(base.child(i).generator()))
        if kind is None:
            kind = cd.kind
        h[i] = cd.eval(theta0)
    p_hat = np.mean(h[:, None] <= t[None, :], axis=0)
    se = np.sqrt(np.maximum(t * (1 - t), 1e-12) / reps)
    if kind == "upper":
        bad = p_hat < t - 3 * se
    elif kind == "lower":
        bad = p_hat > t + 3 * se
    else:
        bad = np.abs(p_hat - t) > 3 * se
    return DominanceReport(t, p_hat, se, kind, reps, h, [float(x) for x in t[bad]])


# ---------------------------------------------------------------------------
# serialization (columns theta, H, h, CV)

CURVE_COLUMNS = ("theta", "H", "h", "CV")


def curve_table(cd: CD, thetas) -> dict:
    t = np.asarray(thetas, dtype=float)
    H = np.asarray(cd.eval(t), dtype=float)
    if cd.has_density:
        h = np.asarray(cd.density(t), dtype=float)
    else:
        h = np.clip(np.gradient(H, t), 0, None) if t.size > 1 else np.zeros_like(t)
    return {"theta": t, "H": H, "h": h, "CV": 2.0 * np.minimum(H, 1.0 - H)}


def default_grid(cd: CD, m: int = 401, lo_q: float = 0.0005, hi_q: float = 0.9995) -> np.ndarray:
    if cd.grid is not None and len(cd.grid) <= m:
        return cd.grid.thetas.copy()
    a, b = cd_quantile(cd, lo_q), cd_quantile(cd, hi_q)
    if not a < b:
        a, b = a - 1.0, b + 1.0
    return np.linspace(a, b, m)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curve_csv(fh, table: dict, metadata: Optional[dict] = None) -> None:
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}: {val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for row in zip(*(table[c] for c in CURVE_COLUMNS)):
        w.writerow([_fmt(x) for x in row])


def curve_to_csv(table: dict, metadata: Optional[dict] = None) -> str:
    buf = io.StringIO()
    write_curve_csv(buf, table, metadata)
    return buf.getvalue()


def read_curve_csv(fh, interpolation: str = "linear") -> GridCurve:
    """Read a theta,H[,h,CV] CSV (``#`` lines are metadata) into a GridCurve of H."""
    lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or "theta" not in reader.fieldnames or "H" not in reader.fieldnames:
        raise ParameterError("curve CSV needs at least the columns theta and H")
    rows = [(float(r["theta"]), float(r["H"])) for r in reader]
    if not rows:
        raise ParameterError("curve CSV has no rows")
    t, v = map(np.asarray, zip(*sorted(rows)))
    return GridCurve(t, v, interpolation)


def curve_to_json(table: dict, metadata: Optional[dict] = None, interpolation: str = "linear") -> str:
    doc = {"metadata": metadata or {}, "interpolation": interpolation}
    doc.update({c: [float(x) for x in table[c]] for c in CURVE_COLUMNS})
    return json.dumps(doc, indent=2, sort_keys=True)


def curve_from_json(text: str) -> GridCurve:
    doc = json.loads(text)
    try:
        return GridCurve(np.asarray(doc["theta"]), np.asarray(doc["H"]),
                         doc.get("interpolation", "linear"))
    except KeyError as exc:
        raise ParameterError(f"curve JSON is missing {exc}") from None
