"""Command-line front end.

Every subcommand writes a JSON result (stdout, or ``--out``) and optionally a
curve/ensemble CSV. All outputs carry a metadata header with the package
version, the command, the seed and the RNG algorithm, and contain no
timestamps, so equal arguments and seed give byte-identical files.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__, cdcore, construct, covlab, datasets, fusion, gfd, npfid
from .errors import ConfDistError, DataError
from .numeric import RNG_ALGORITHM, RngStream

SEED_ENV = "CONFDIST_SEED"

CD_FAMILIES = ("normal_mean", "t_mean", "variance", "fisher_z", "binomial", "wilcoxon",
               "exp2_mu", "exp2_sigma", "bootstrap")
GFD_FAMILIES = gfd.FAMILIES + ("u_theta", "binomial", "poisson", "negbinomial", "regression")
CD_PARAMS = ("xbar", "n", "sigma", "s", "s2", "r", "x", "k", "theta_hat", "kind", "variant", "column")


class UsageError(ConfDistError):
    """Bad or missing command-line arguments."""

    exit_code = 2


# ---------------------------------------------------------------------------
# helpers

def _metadata(args) -> dict:
    return {"version": __version__, "command": args.command, "seed": args.seed,
            "rng": RNG_ALGORITHM}


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(args, result: dict) -> None:
    doc = {"metadata": _metadata(args), "result": _clean(result)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_grid(spec: Optional[str]):
    if not spec:
        return None
    try:
        lo, hi, m = spec.split(":")
        return np.linspace(float(lo), float(hi), int(m))
    except ValueError:
        raise UsageError(f"grid must look like LO:HI:POINTS, got {spec!r}") from None


def _read_values(path: str, column: Optional[str]) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return datasets.read_values_csv(fh, column)


def _read_surv(path: str) -> npfid.SurvData:
    with open(path, encoding="utf-8") as fh:
        t, e = datasets.read_survival_csv(fh)
    return npfid.SurvData(t, e)


def _cd_summary(cd: cdcore.CD, level: float, null: Optional[float], estimate: str) -> dict:
    out = {"kind": cd.kind, "label": cd.label, "support": list(cd.support)}
    if cd.monotone:
        out["median"] = cdcore.point_estimate(cd, "median")
        if estimate != "median":
            out[estimate] = cdcore.point_estimate(cd, estimate)
        out["interval"] = cdcore.interval(cd, level).as_dict()
    if null is not None:
        out["null"] = null
        out["p_value_le"] = cdcore.p_value_one_sided(cd, null, "le")
        out["p_value_ge"] = cdcore.p_value_one_sided(cd, null, "ge")
        out["p_value_two_sided"] = cdcore.p_value_two_sided(cd, null)
    return out


def _write_curve(args, cd: cdcore.CD, grid=None) -> None:
    if not getattr(args, "curve", None):
        return
    t = grid if grid is not None else (_parse_grid(args.grid) if args.grid else cdcore.default_grid(cd))
    meta = dict(_metadata(args), label=cd.label)
    _write_text(args.curve, cdcore.curve_to_csv(cdcore.curve_table(cd, t), meta))


# ---------------------------------------------------------------------------
# CD descriptors (shared by `cd` and `combine`)

def cd_from_descriptor(d: dict, base_dir: str = ".") -> cdcore.CD:
    """Build a CD from a JSON-style descriptor.

    Either ``{"curve": path}`` for a saved curve CSV, or ``{"family": name, ...}``
    with the same parameter names as the ``cd`` subcommand flags.
    """
    if "curve" in d:
        path = os.path.join(base_dir, d["curve"])
        with open(path, encoding="utf-8") as fh:
            curve = cdcore.read_curve_csv(fh)
        return cdcore.CD.from_grid(curve, kind=d.get("kind", "asymptotic"), clean=True, label=d["curve"])
    fam = d.get("family")
    data = d.get("data")
    if isinstance(data, str):
        data = _read_values(os.path.join(base_dir, data), d.get("column"))
    elif data is not None:
        data = np.asarray(data, dtype=float)
    g = d.get
    if fam == "normal_mean":
        if data is not None:
            return construct.normal_mean_cd(float(np.mean(data)), data.size, float(g("sigma", 1.0)))
        return construct.normal_mean_cd(float(d["xbar"]), int(d["n"]), float(g("sigma", 1.0)))
    if fam == "t_mean":
        if data is not None:
            return construct.t_mean_cd(data)
        return construct.t_mean_cd_from_stats(float(d["xbar"]), float(d["s"]), int(d["n"]))
    if fam == "variance":
        if data is not None:
            return construct.variance_cd(data)
        return construct.variance_cd_from_stats(float(d["s2"]), int(d["n"]))
    if fam == "fisher_z":
        return construct.fisher_z_cd(float(d["r"]), int(d["n"]))
    if fam == "binomial":
        return construct.binomial_cd(int(d["x"]), int(d["n"]), g("kind", "half"))
    if fam == "wilcoxon":
        return construct.wilcoxon_location_cd(_require_data(data, fam))
    if fam in ("exp2_mu", "exp2_sigma"):
        fit = construct.exp2_fit(_require_data(data, fam), g("k"))
        h1, h2 = construct.exp2_cds(fit)
        return h1 if fam == "exp2_mu" else h2
    if fam == "bootstrap":
        return construct.bootstrap_cd(float(d["theta_hat"]), _require_data(data, fam), g("variant", "reflected"))
    raise UsageError(f"unknown CD family {fam!r}; choose from {', '.join(CD_FAMILIES)}")


def _require_data(data, fam):
    if data is None:
        raise UsageError(f"family {fam!r} needs data")
    return data


# ---------------------------------------------------------------------------
# subcommands

def cmd_cd(args) -> int:
    d = {k: getattr(args, k) for k in CD_PARAMS if getattr(args, k) is not None}
    d["family"] = args.family
    if args.data:
        d["data"] = _read_values(args.data, args.column)
    try:
        cd = cd_from_descriptor(d)
    except KeyError as exc:
        raise UsageError(f"family {args.family!r} needs --{exc.args[0].replace('_', '-')}") from None
    _write_curve(args, cd)
    _emit(args, dict(family=args.family, **_cd_summary(cd, args.level, args.null, args.estimate)))
    return 0


def cmd_combine(args) -> int:
    base = "."
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"bad JSON config: {exc}") from None
        base = os.path.dirname(os.path.abspath(args.config))
    else:
        cfg = {}
    studies = list(cfg.get("studies", [])) + [{"curve": os.path.abspath(p)} for p in (args.curves or [])]
    if not studies:
        raise UsageError("no studies given: use --config or --curves")
    try:
        cds = [cd_from_descriptor(s, base) for s in studies]
    except KeyError as exc:
        raise UsageError(f"study descriptor is missing {exc.args[0]!r}") from None
    weights = cfg.get("weights", args.weights and [float(w) for w in args.weights.split(",")])
    if weights == "sqrt_n":
        missing = [i for i, s in enumerate(studies) if "n" not in s]
        if missing:
            raise DataError(f"sqrt_n weights need an 'n' in every study; studies {missing} have none")
        weights = fusion.sqrt_n_weights([s["n"] for s in studies])
    elif weights == "inverse_variance":
        weights = fusion.inverse_variance_weights(cds)
    elif isinstance(weights, str):
        raise DataError(f"weights must be a list, 'sqrt_n' or 'inverse_variance', got {weights!r}")
    spec = fusion.CombinerSpec(
        rule=cfg.get("rule", args.rule),
        weights=None if weights is None else tuple(weights),
        gc_mode=cfg.get("gc_mode", args.gc_mode),
        mc_draws=int(cfg.get("mc_draws", args.mc_draws)),
        rng=RngStream(args.seed),
        reflect=bool(cfg.get("reflect", args.reflect)),
    )
    grid = _parse_grid(args.grid)
    comb = fusion.combine(cds, spec, grid)
    _write_curve(args, comb, comb.grid.thetas)
    res = {"rule": spec.rule, "reflect": spec.reflect, "k": len(cds),
           "weights": list(spec.weight_vector(len(cds))),
           **_cd_summary(comb, args.level, args.null, "median")}
    _emit(args, res)
    return 0


def _gfd_config(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"bad JSON config: {exc}") from None
    for k in ("family", "x", "m", "r", "variant", "sigma", "param", "column", "draws"):
        v = getattr(args, k, None)
        if v is not None and k not in cfg:
            cfg[k] = v
    if args.data:
        cfg["data_path"] = args.data
    return cfg


def cmd_gfd(args) -> int:
    cfg = _gfd_config(args)
    fam = cfg.get("family")
    if fam not in GFD_FAMILIES:
        raise UsageError(f"unknown GFD family {fam!r}; choose from {', '.join(GFD_FAMILIES)}")
    res = {"family": fam}
    if fam in ("binomial", "poisson", "negbinomial"):
        if cfg.get("x") is None:
            raise UsageError(f"family {fam!r} needs x")
        cd = gfd.gfd_discrete(fam, int(cfg["x"]), m=cfg.get("m"), r=cfg.get("r"))
        _write_curve(args, cd, _parse_grid(args.grid) if args.grid else None)
        res.update(_cd_summary(cd, args.level, None, "median"))
        _emit(args, res)
        return 0

    y = _gfd_data(cfg)
    if fam == "regression":
        return _gfd_regression(args, cfg, y, res)
    if fam == "u_theta":
        curve = gfd.gfd_uniform_irregular(gfd.u_theta_model(), y, cfg.get("variant", "r1"))
    elif fam == "normal":
        curve = _normal_marginal(y, cfg.get("param", "mu"))
    else:
        params = {"sigma": float(cfg["sigma"])} if cfg.get("sigma") is not None else {}
        model = gfd.family_model(fam, y, **params)
        grid = _parse_grid(args.grid) or _auto_grid(fam, y, params)
        curve = gfd.gfd_density(model, y, grid)
    cd = gfd.density_to_cd(curve, label=f"{fam} GFD")
    _write_curve(args, cd, curve.thetas)
    res.update(_cd_summary(cd, args.level, None, "median"))
    _emit(args, res)
    return 0


def _gfd_data(cfg) -> np.ndarray:
    if "data" in cfg:
        return np.asarray(cfg["data"], dtype=float)
    if "data_path" in cfg:
        return _read_values(cfg["data_path"], None if cfg.get("family") == "regression" else cfg.get("column"))
    raise UsageError("this family needs data (--data or a 'data' list in the config)")


def _auto_grid(fam, y, params, m: int = 2001) -> np.ndarray:
    if fam == "normal_mean":
        se = params.get("sigma", 1.0) / math.sqrt(y.size)
        return np.linspace(y.mean() - 8 * se, y.mean() + 8 * se, m)
    if fam == "exponential":
        rate = y.size / y.sum()
        return np.linspace(rate * 1e-3, rate * (1 + 10 / math.sqrt(y.size)), m)
    if fam == "uniform_scale":
        top = y.max()
        return np.linspace(top, top * (1 + 40.0 / y.size), m)
    raise UsageError(f"no automatic grid for {fam!r}; pass --grid")


def _normal_marginal(y, param: str) -> cdcore.GridCurve:
    model = gfd.family_model("normal", y)
    s, n, mu = float(np.std(y, ddof=1)), y.size, float(np.mean(y))
    gx = np.linspace(mu - 10 * s / math.sqrt(n), mu + 10 * s / math.sqrt(n), 401)
    gy = np.linspace(s * 0.2, s * 4.0, 401)
    surf = gfd.gfd_density(model, y, (gx, gy))
    if param not in ("mu", "sigma"):
        raise UsageError("param must be 'mu' or 'sigma'")
    return surf.marginal(0 if param == "mu" else 1)


def _gfd_regression(args, cfg, y, res) -> int:
    if "data_path" not in cfg:
        raise UsageError("regression reads a CSV with a response column and covariates")
    import csv as _csv

    with open(cfg["data_path"], encoding="utf-8") as fh:
        rows = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    reader = _csv.DictReader(rows)
    ycol = cfg.get("column") or "y"
    if reader.fieldnames is None or ycol not in reader.fieldnames:
        raise UsageError(f"response column {ycol!r} not found")
    xcols = [c for c in reader.fieldnames if c != ycol]
    recs = list(reader)
    try:
        yv = np.array([float(r[ycol]) for r in recs])
        X = np.column_stack([np.ones(len(recs))] + [[float(r[c]) for r in recs] for c in xcols])
    except ValueError as exc:
        raise UsageError(f"non-numeric regression data: {exc}") from None
    M = int(cfg.get("draws") or 100_000)
    draws = gfd.gfd_linear_regression(X, yv, M=M, rng=RngStream(args.seed))
    names = ["intercept"] + xcols
    res["coefficients"] = {nm: {"median": float(np.median(draws.beta[:, j])),
                                "interval": list(draws.interval(j, args.level))}
                           for j, nm in enumerate(names)}
    res["sigma_median"] = float(np.median(draws.sigma))
    res["M"] = M
    res["method"] = draws.method
    _emit(args, res)
    return 0


def cmd_survfid(args) -> int:
    M = args.M
    if args.test == "two-sample":
        if not (args.a and args.b):
            raise UsageError("the two-sample test needs --a and --b")
        a, b = _read_surv(args.a), _read_surv(args.b)
        r = npfid.two_sample_test(a, b, M, RngStream(args.seed), sampler=args.sampler)
        _emit(args, dict(test="two-sample", **r.as_dict()))
        return 0
    if not args.data:
        raise UsageError("survfid needs --data (or --test two-sample with --a and --b)")
    data = _read_surv(args.data)
    ens = npfid.sample_ensemble(data, M, RngStream(args.seed), args.sampler, args.interp)
    times = ([float(x) for x in args.times.split(",")] if args.times
             else np.quantile(data.times, [0.1, 0.25, 0.5, 0.75, 0.9]).tolist())
    bands = []
    for t in times:
        iv = npfid.pointwise_ci(ens, t, args.level)
        bands.append({"t": t, "lower": iv.lower, "upper": iv.upper})
    if args.ensemble:
        grid = _parse_grid(args.grid) if args.grid else np.unique(np.concatenate([[0.0], data.times]))
        _write_text(args.ensemble, npfid.ensemble_to_csv(ens, grid, _metadata(args)))
    _emit(args, {"M": M, "sampler": args.sampler, "interp": args.interp, "ess": ens.ess,
                 "level": args.level, "pointwise": bands})
    return 0


def cmd_coverage(args) -> int:
    rng = RngStream(args.seed)
    exp = args.experiment
    if exp == "table2":
        r = covlab.table2_pipeline(args.reps, rng)
        _emit(args, r.as_dict())
        return 0
    n, theta0 = args.n, args.theta0
    if exp == "t_mean":
        rep = covlab.coverage_experiment(construct.t_mean_cd, lambda g, th: g.normal(th, 1.0, n),
                                         theta0, args.levels, args.reps, rng, label="t_mean")
    elif exp == "exp2":
        def gen(g, th):
            return th + g.exponential(1.0, n)
        rep = covlab.coverage_experiment(lambda x: construct.exp2_cds(construct.exp2_fit(x))[0],
                                         gen, theta0, args.levels, args.reps, rng, label="exp2_mu")
    elif exp in ("u_theta_r1", "u_theta_r2", "u_theta_flat", "u_theta_reference"):
        if not theta0 > 1:
            raise UsageError("U(theta, theta^2) needs theta0 > 1")

        def build(y):
            if exp.endswith(("r1", "r2")):
                curve = gfd.gfd_uniform_irregular(gfd.u_theta_model(), y, exp[-2:])
            else:
                curve = gfd.bayes_u_theta(y, exp.split("_")[-1])
            return gfd.density_to_cd(curve)

        rep = covlab.coverage_experiment(build, lambda g, th: th + (th * th - th) * g.random(n),
                                         theta0, args.levels, args.reps, rng, label=exp)
    else:
        raise UsageError(f"unknown experiment {exp!r}")
    if args.csv:
        _write_text(args.csv, "".join(f"# {k}: {v}\n" for k, v in _metadata(args).items()) + rep.to_csv())
    _emit(args, rep.as_dict())
    return 0


def cmd_datasets(args) -> int:
    text = datasets.dataset_csv(args.name)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser

def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="confdist", description="Confidence distributions and fiducial inference.")
    p.add_argument("--version", action="version", version=f"confdist {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, curve=True):
        sp.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV} or 0)")
        sp.add_argument("--out", help="write the JSON result here instead of stdout")
        sp.add_argument("--level", type=float, default=0.95)
        if curve:
            sp.add_argument("--curve", help="write theta,H,h,CV CSV here")
            sp.add_argument("--grid", help="curve grid as LO:HI:POINTS")

    sp = sub.add_parser("cd", help="build a CD from data or summary statistics")
    common(sp)
    sp.add_argument("--family", required=True, choices=CD_FAMILIES)
    sp.add_argument("--data", help="CSV with a header row")
    sp.add_argument("--column", help="data column (default: first)")
    for name, typ in (("xbar", float), ("n", int), ("sigma", float), ("s", float), ("s2", float),
                      ("r", float), ("x", int), ("k", int), ("theta-hat", float)):
        sp.add_argument(f"--{name}", type=typ)
    sp.add_argument("--kind", choices=("upper", "lower", "half"))
    sp.add_argument("--variant", choices=("reflected", "raw"))
    sp.add_argument("--null", type=float, help="null value for p-values")
    sp.add_argument("--estimate", choices=("median", "mean", "mode"), default="median")
    sp.set_defaults(func=cmd_cd)

    sp = sub.add_parser("combine", help="combine CDs from independent studies")
    common(sp)
    sp.add_argument("--config", help="JSON with 'studies' descriptors and combination options")
    sp.add_argument("--curves", nargs="*", help="saved curve CSVs to combine")
    sp.add_argument("--rule", default="quantile", choices=fusion.RULES)
    sp.add_argument("--weights", help="comma-separated weights")
    sp.add_argument("--gc-mode", default="analytic", choices=("analytic", "monte_carlo"))
    sp.add_argument("--mc-draws", type=int, default=fusion.DEFAULT_MC_DRAWS)
    sp.add_argument("--reflect", action="store_true",
                    help="combine 1-H instead of H (orientation for fisher/min/max)")
    sp.add_argument("--null", type=float)
    sp.set_defaults(func=cmd_combine)

    sp = sub.add_parser("gfd", help="generalized fiducial distribution for a family")
    common(sp)
    sp.add_argument("--config", help="JSON with 'family', 'data' and parameters")
    sp.add_argument("--family", choices=GFD_FAMILIES)
    sp.add_argument("--data", help="CSV with a header row")
    sp.add_argument("--column")
    sp.add_argument("--x", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--r", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--variant", choices=("r1", "r2"))
    sp.add_argument("--param", choices=("mu", "sigma"))
    sp.add_argument("--draws", type=int, help="number of regression draws")
    sp.set_defaults(func=cmd_gfd)

    sp = sub.add_parser("survfid", help="fiducial survival curves for right-censored data")
    common(sp, curve=False)
    sp.add_argument("--data", help="CSV with columns time,event")
    sp.add_argument("--test", choices=("two-sample",))
    sp.add_argument("--a")
    sp.add_argument("--b")
    sp.add_argument("--M", type=int, default=1000)
    sp.add_argument("--sampler", choices=("importance", "rejection"), default="importance")
    sp.add_argument("--interp", choices=("log_linear", "midpoint"), default="log_linear")
    sp.add_argument("--times", help="comma-separated times for pointwise intervals")
    sp.add_argument("--ensemble", help="write the ensemble CSV here")
    sp.add_argument("--grid", help="ensemble time grid as LO:HI:POINTS")
    sp.set_defaults(func=cmd_survfid)

    sp = sub.add_parser("coverage", help="Monte Carlo coverage experiments")
    common(sp, curve=False)
    sp.add_argument("--experiment", required=True,
                    choices=("table2", "t_mean", "exp2", "u_theta_r1", "u_theta_r2",
                             "u_theta_flat", "u_theta_reference"))
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--theta0", type=float, default=0.0)
    sp.add_argument("--levels", type=lambda s: [float(x) for x in s.split(",")], default=[0.95])
    sp.add_argument("--csv", help="also write the report as CSV")
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("datasets", help="print an embedded data set as CSV")
    sp.add_argument("name", choices=datasets.NAMES)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_datasets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.seed is None:
            args.seed = _default_seed()
        return int(args.func(args))
    except ConfDistError as exc:
        print(f"confdist: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"confdist: error: file not found: {exc.filename}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
