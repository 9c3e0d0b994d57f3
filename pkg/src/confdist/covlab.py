"""Monte Carlo checks of CD calibration: uniformity at the truth and interval coverage.

Every replication draws its data from its own child stream of the supplied
:class:`~confdist.numeric.RngStream`, so reports are bit-reproducible and do
not depend on evaluation order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .cdcore import CD, interval
from .construct import fisher_z_cd
from .errors import ParameterError
from .fusion import CombinerSpec, combine
from .numeric import RngStream

MIN_UNIFORMITY_REPS = 1000
MIN_COVERAGE_REPS = 100

# bivariate normal used for the four-study simulation (cd-4 baseline / one year)
TABLE2_PARAMS = {"mu1": 3.288, "mu2": 4.093, "var1": 0.657, "var2": 1.346, "rho": 0.723,
                 "n": 20, "studies": 4}


def _stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise ParameterError("replication experiments need an RngStream or an integer seed")


@dataclass
class UniformityResult:
    statistic: float
    p_value: float
    reps: int
    h_values: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {"ks_statistic": self.statistic, "p_value": self.p_value, "reps": self.reps}


def uniformity_test(cd_builder: Callable, generator: Callable, theta0: float, reps: int,
                    rng) -> UniformityResult:
    """Kolmogorov-Smirnov test of ``{H(theta0)}`` against U(0, 1).

    ``generator(gen, theta0)`` simulates one data set from a numpy Generator
    and ``cd_builder(data)`` returns its CD.
    """
    if reps < MIN_UNIFORMITY_REPS:
        raise ParameterError(f"uniformity test needs reps >= {MIN_UNIFORMITY_REPS}, got {reps}")
    base = _stream(rng)
    h = np.empty(reps)
    for i in range(reps):
        data = generator(base.child(i).generator(), theta0)
        h[i] = cd_builder(data).eval(theta0)
    res = stats.kstest(h, "uniform")
    return UniformityResult(float(res.statistic), float(res.pvalue), reps, h)


@dataclass
class CoverageReport:
    levels: list
    empirical_coverage: list
    mean_length: list
    sd_length: list
    reps: int
    seed: int
    label: str = ""
    lengths: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.reps < 1:
            raise ParameterError("a report needs at least one replication")

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "levels": [float(x) for x in self.levels],
            "empirical_coverage": [float(x) for x in self.empirical_coverage],
            "mean_length": [float(x) for x in self.mean_length],
            "sd_length": [float(x) for x in self.sd_length],
            "reps": self.reps,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "level", "coverage", "mean_length", "sd_length", "reps", "seed"])
        for row in zip(self.levels, self.empirical_coverage, self.mean_length, self.sd_length):
            w.writerow([self.label, *(repr(float(x)) for x in row), self.reps, self.seed])
        return buf.getvalue()


def _summarize(levels, hits, lengths, reps, seed, label) -> CoverageReport:
    cover = (hits.sum(axis=0) / reps).tolist()
    # lengths may be infinite for one-sided supports; report them as they are
    mean = lengths.mean(axis=0).tolist()
    sd = (lengths.std(axis=0, ddof=1) if reps > 1 else np.zeros(len(levels))).tolist()
    return CoverageReport(list(levels), cover, mean, sd, reps, seed, label, lengths)


def coverage_experiment(cd_builder: Callable, generator: Callable, theta0: float,
                        levels: Sequence[float] = (0.95,), reps: int = 1000, rng=0,
                        side: str = "two", label: str = "") -> CoverageReport:
    """Share of CD intervals containing ``theta0`` at each level, with length summaries."""
    levels = [float(x) for x in levels]
    if not levels or any(not 0 < a < 1 for a in levels):
        raise ParameterError("levels must lie in (0, 1)")
    if reps < MIN_COVERAGE_REPS:
        raise ParameterError(f"coverage experiments need reps >= {MIN_COVERAGE_REPS}, got {reps}")
    base = _stream(rng)
    hits = np.zeros((reps, len(levels)), dtype=bool)
    lengths = np.zeros((reps, len(levels)))
    for i in range(reps):
        cd = cd_builder(generator(base.child(i).generator(), theta0))
        for j, lev in enumerate(levels):
            iv = interval(cd, lev, side)
            hits[i, j] = iv.contains(theta0)
            lengths[i, j] = iv.length
    return _summarize(levels, hits, lengths, reps, base.seed, label)


def simulate_bivariate_normal(gen: np.random.Generator, n: int, mu1: float, mu2: float,
                              var1: float, var2: float, rho: float) -> np.ndarray:
    """``n x 2`` draws through an explicit Cholesky factor."""
    s1, s2 = math.sqrt(var1), math.sqrt(var2)
    L = np.array([[s1, 0.0], [rho * s2, s2 * math.sqrt(1 - rho * rho)]])
    return gen.standard_normal((n, 2)) @ L.T + np.array([mu1, mu2])


@dataclass
class Table2Result:
    fisher_z: CoverageReport
    combined: CoverageReport
    combined_shorter_share: float

    def as_dict(self) -> dict:
        return {"fisher_z": self.fisher_z.as_dict(), "combined": self.combined.as_dict(),
                "combined_shorter_share": self.combined_shorter_share,
                "params": dict(TABLE2_PARAMS)}


def table2_pipeline(reps: int = 200, rng=0, level: float = 0.95,
                    params: Optional[dict] = None) -> Table2Result:
    """Four simulated correlation studies per replication, Fisher-z CDs and their combination.

    Per-study coverage and length pool all ``studies x reps`` intervals; the
    combined CD uses the normal quantile rule with equal weights.
    """
    p = dict(TABLE2_PARAMS, **(params or {}))
    if reps < 200:
        raise ParameterError(f"the four-study pipeline needs reps >= 200, got {reps}")
    base = _stream(rng)
    rho0, n, k = p["rho"], int(p["n"]), int(p["studies"])
    spec = CombinerSpec("quantile")
    single_hits, single_len = [], []
    comb_hits = np.zeros((reps, 1), dtype=bool)
    comb_len = np.zeros((reps, 1))
    shorter = 0
    for i in range(reps):
        rep = base.child(i)
        cds = []
        lens = []
        for s in range(k):
            xy = simulate_bivariate_normal(rep.child(s).generator(), n, p["mu1"], p["mu2"],
                                           p["var1"], p["var2"], rho0)
            r = float(np.corrcoef(xy[:, 0], xy[:, 1])[0, 1])
            cd = fisher_z_cd(r, n)
            iv = interval(cd, level)
            single_hits.append(iv.contains(rho0))
            single_len.append(iv.length)
            lens.append(iv.length)
            cds.append(cd)
        c = combine(cds, spec)
        iv = interval(c, level)
        comb_hits[i, 0] = iv.contains(rho0)
        comb_len[i, 0] = iv.length
        shorter += iv.length < min(lens)
    sh = np.array(single_hits)[:, None]
    sl = np.array(single_len)[:, None]
    fz = _summarize([level], sh, sl, sh.shape[0], base.seed, "fisher_z")
    cb = _summarize([level], comb_hits, comb_len, reps, base.seed, "combined")
    return Table2Result(fz, cb, shorter / reps)
