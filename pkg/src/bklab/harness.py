"""Experiment orchestration: replicated scans across sample sizes.

Every scan derives one stream seed per (n, replicate) cell through the
fixed splitmix64 chain in :mod:`bklab.seeds`, so outputs are a pure
function of the config file: reruns are byte-identical at any worker
count, and per-replicate rows can always be re-aggregated from the CSVs.
"""

import csv
import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.special import ndtri

from . import __version__
from .bk import (csr_nu_min, rate_b, rate_kiefer_pointwise, rate_lambda,
                 residual_pointwise, residual_sup, weighted_residual_sup)
from .coefficients import make_coefficients
from .decomp import covariance_gamma, y_summands
from .empirical import EmpiricalSummary, sup_abs_beta, sup_abs_u
from .errors import ConfigError, ModelError
from .innovations import get_innovation
from .model import (LinearProcessModel, build_marginal_oracle,
                    check_dependence_condition, exact_marginal_oracle,
                    validate_innovation)
from .paths import pit_transform, simulate_path
from .seeds import mix_seed

CONFIG_VERSION = 1


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    n_grid: tuple
    replicates: int
    master_seed: int
    interval: tuple = (0.05, 0.95)
    nu: float | None = None
    refine: int | None = None
    trunc_tol: float | None = None
    oracle: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    increments: dict = field(default_factory=dict)
    covariance: dict = field(default_factory=dict)
    outputs: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if any(int(n) < 16 for n in self.n_grid):
            raise ConfigError("every n in n_grid must be at least 16")
        if list(self.n_grid) != sorted(set(int(n) for n in self.n_grid)):
            raise ConfigError("n_grid must be strictly increasing")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        a, b = self.interval
        if not (0.0 <= a < b <= 1.0):
            raise ConfigError(f"interval must satisfy 0 <= a < b <= 1, got {self.interval}")


def config_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("config root must be a mapping")
    if d.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got "
                          f"{d.get('version')!r}")
    try:
        model = d["model"]
        scan = d["scan"]
        return ExperimentConfig(
            model=model,
            n_grid=tuple(int(n) for n in scan["n_grid"]),
            replicates=int(scan["replicates"]),
            master_seed=int(scan["master_seed"]),
            interval=tuple(scan.get("interval", (0.05, 0.95))),
            nu=scan.get("nu"),
            refine=scan.get("refine"),
            trunc_tol=scan.get("trunc_tol"),
            oracle=d.get("oracle", {}),
            simulate=d.get("simulate", {}),
            increments=d.get("increments", {}),
            covariance=d.get("covariance", {}),
            outputs=d.get("outputs", "out"),
            raw=d,
        )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"config is missing required key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc


def config_from_file(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return config_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc


def build_model(config):
    m = config.model
    try:
        innov_spec = dict(m["innovation"])
        coeff_spec = dict(m["coefficients"])
        rho = float(m["rho"])
    except KeyError as exc:
        raise ConfigError(f"model block is missing {exc}") from exc
    try:
        innov = get_innovation(innov_spec.pop("name"), **innov_spec)
        coeffs = make_coefficients(coeff_spec.pop("kind"), **coeff_spec)
    except ModelError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model block: {exc}") from exc
    return LinearProcessModel(
        innovations=innov, coefficients=coeffs, rho=rho,
        gamma1=m.get("gamma1"), gamma2=m.get("gamma2"))


def build_oracle(model, config):
    spec = config.oracle
    mode = spec.get("mode", "auto")
    if mode == "exact":
        return exact_marginal_oracle(model)
    if mode == "mixture":
        return build_marginal_oracle(
            model, mixture_points=spec.get("mixture_points", 100_000),
            seed=spec.get("seed", 0), trunc_tol=spec.get("trunc_tol"))
    if mode == "auto":
        if model.innovations.name == "gaussian":
            return exact_marginal_oracle(model)
        if model.coefficients.memory == 0:
            return build_marginal_oracle(model, mixture_points=1, seed=0)
        return build_marginal_oracle(
            model, mixture_points=spec.get("mixture_points", 100_000),
            seed=spec.get("seed", 0), trunc_tol=spec.get("trunc_tol"))
    raise ConfigError(f"unknown oracle mode {mode!r}")


def gate_conditions(config, model):
    """Abort-style condition checks shared by the scan entry points.

    The squared-tail decay check always applies; the density-smoothness
    check applies only to models with actual dependence (a memoryless
    kernel is the classical i.i.d. case and needs no innovation
    smoothness).
    """
    dep = check_dependence_condition(model.coefficients, model.rho)
    if not dep.admissible:
        raise ModelError(
            "dependence gate failed: squared coefficient tails do not decay "
            f"like i^(-2/rho) log(i)^-3 at rho={model.rho}\n" + dep.describe())
    smooth = None
    if model.has_memory:
        smooth = validate_innovation(model.innovations)
        if not model.innovations.smooth or smooth.violation:
            raise ModelError(
                "smoothness gate failed: a dependent model needs the "
                "innovation density and its first two derivatives bounded "
                f"on the line\n" + smooth.describe())
    if config.nu is not None:
        if model.gamma_min is None:
            raise ModelError(
                "weighted scan requested (nu set) but the model does not "
                "declare gamma1/gamma2")
        if model.gamma_min < 1.0:
            raise ModelError(
                f"weighted scan needs gamma = min(gamma1, gamma2) >= 1, "
                f"got {model.gamma_min}")
        threshold = csr_nu_min(model.gamma_min)
        if not config.nu > threshold:
            raise ModelError(
                f"weight exponent nu={config.nu} is not admissible for "
                f"gamma={model.gamma_min}: need nu > max(2*gamma, 3*gamma-2) "
                f"= {threshold}")
    return dep, smooth


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    ratio_stability: float


def fit_rate(pairs, normalizer=rate_b):
    """OLS of log statistic on log n, plus max/min of statistic/normalizer.

    Parameters
    ----------
    pairs : sequence of (n, statistic)
        At least 3 pairs, all statistics strictly positive.
    normalizer : callable
        Rate used for the ratio-stability diagnostic (default rate_b).
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("rate fit needs at least 3 (n, statistic) pairs")
    ns = np.array([float(n) for n, _ in pairs])
    stats = np.array([float(s) for _, s in pairs])
    if np.any(stats <= 0.0):
        raise ValueError("rate fit needs strictly positive statistics")
    slope, intercept = np.polyfit(np.log(ns), np.log(stats), 1)
    ratios = stats / np.array([normalizer(int(n)) for n in ns])
    return RateFit(slope=float(slope), intercept=float(intercept),
                   ratio_stability=float(ratios.max() / ratios.min()))


# ---------------------------------------------------------------------------
# rate scan


@dataclass(frozen=True)
class RateRow:
    n: int
    replicate: int
    seed: int
    sup_abs: float
    weighted_sup: float
    pointwise_mid: float
    lil_beta: float
    lil_u: float


@dataclass(frozen=True)
class RateScanResult:
    rows: list
    per_n: dict     # n -> {stat: {"mean","median","max"}}
    fits: dict      # statistic name -> RateFit
    lil_medians: dict

    def median(self, stat, n):
        return self.per_n[n][stat]["median"]


_WORKER = {}


def _rate_worker_init(model_cfg_raw):
    cfg = config_from_dict(model_cfg_raw)
    model = build_model(cfg)
    _WORKER["config"] = cfg
    _WORKER["model"] = model
    _WORKER["oracle"] = build_oracle(model, cfg)


def _rate_cell(model, oracle, config, n, r):
    seed = mix_seed(config.master_seed, n, r)
    path = simulate_path(model, n, seed, trunc_tol=config.trunc_tol)
    u = pit_transform(path, oracle)
    xs = EmpiricalSummary.from_sample(path.x, seed=seed)
    us = EmpiricalSummary.from_sample(u, seed=seed)
    a, b = config.interval
    rs = residual_sup(xs, us, oracle, a, b, refine=config.refine, seed=seed)
    if config.nu is not None:
        ws = weighted_residual_sup(xs, us, oracle, config.nu,
                                   refine=config.refine, seed=seed)
        weighted = ws.weighted_sup
    else:
        weighted = math.nan
    mid = abs(residual_pointwise(xs, us, oracle, 0.5))
    norm = math.sqrt(2.0 * math.log(math.log(n)))
    return RateRow(
        n=n, replicate=r, seed=seed, sup_abs=rs.sup_abs,
        weighted_sup=weighted, pointwise_mid=mid,
        lil_beta=sup_abs_beta(xs, oracle) / norm,
        lil_u=sup_abs_u(us) / norm)


def _rate_chunk(args):
    n, r_lo, r_hi = args
    cfg = _WORKER["config"]
    model = _WORKER["model"]
    oracle = _WORKER["oracle"]
    return [_rate_cell(model, oracle, cfg, n, r) for r in range(r_lo, r_hi)]


def _scan_cells(config, threads):
    chunk = max(1, config.replicates // max(4 * max(threads, 1), 1))
    tasks = []
    for n in config.n_grid:
        for lo in range(0, config.replicates, chunk):
            tasks.append((n, lo, min(lo + chunk, config.replicates)))
    return tasks


def _run_chunks(config, tasks, threads):
    if threads <= 1:
        _rate_worker_init(config.raw)
        results = [_rate_chunk(t) for t in tasks]
        _WORKER.clear()
        return results
    with multiprocessing.Pool(threads, initializer=_rate_worker_init,
                              initargs=(config.raw,)) as pool:
        return pool.map(_rate_chunk, tasks)


def run_rate_scan(config, threads=1, out_dir=None):
    """Replicated residual-rate scan over the config's n-grid.

    For each (n, replicate): simulate, PIT, residual sup on the working
    interval, weighted sup when nu is set, pointwise residual at 1/2,
    and both normalized sup statistics for the iterated-logarithm check.
    Aggregates medians/means/maxima per n and fits log-log slopes.
    """
    model = build_model(config)
    gate_conditions(config, model)
    rows = [row for chunk in _run_chunks(config, _scan_cells(config, threads), threads)
            for row in chunk]
    rows.sort(key=lambda r: (r.n, r.replicate))

    per_n = {}
    for n in config.n_grid:
        sub = [r for r in rows if r.n == n]
        per_n[n] = {
            stat: _aggregate([getattr(r, stat) for r in sub])
            for stat in ("sup_abs", "weighted_sup", "pointwise_mid",
                         "lil_beta", "lil_u")
        }

    fits = {}
    if len(config.n_grid) >= 3:
        fits["sup_abs"] = fit_rate([(n, per_n[n]["sup_abs"]["median"])
                                    for n in config.n_grid])
        if config.nu is not None:
            fits["weighted_sup"] = fit_rate(
                [(n, per_n[n]["weighted_sup"]["median"]) for n in config.n_grid])
        fits["pointwise_mid"] = fit_rate(
            [(n, per_n[n]["pointwise_mid"]["median"]) for n in config.n_grid],
            normalizer=rate_kiefer_pointwise)

    lil_medians = {n: per_n[n]["lil_beta"]["median"] for n in config.n_grid}
    result = RateScanResult(rows=rows, per_n=per_n, fits=fits,
                            lil_medians=lil_medians)
    if out_dir is not None:
        write_rate_scan_csv(result, os.path.join(out_dir, "rate_scan.csv"))
        write_fit_csv(result.fits, os.path.join(out_dir, "fit.csv"))
    return result


def _aggregate(values):
    arr = np.asarray(values, dtype=float)
    if np.all(np.isnan(arr)):
        return {"mean": math.nan, "median": math.nan, "max": math.nan}
    return {"mean": float(np.mean(arr)), "median": float(np.median(arr)),
            "max": float(np.max(arr))}


def write_rate_scan_csv(result, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "replicate", "seed", "sup_abs", "weighted_sup",
                    "pointwise_mid", "lil_beta", "lil_u"])
        for r in result.rows:
            w.writerow([r.n, r.replicate, r.seed, repr(r.sup_abs),
                        repr(r.weighted_sup), repr(r.pointwise_mid),
                        repr(r.lil_beta), repr(r.lil_u)])


def write_fit_csv(fits, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "slope", "intercept", "ratio_stability"])
        for name, fit in fits.items():
            w.writerow([name, repr(fit.slope), repr(fit.intercept),
                        repr(fit.ratio_stability)])


# ---------------------------------------------------------------------------
# iterated-logarithm scan


def run_lil_scan(config, threads=1, out_dir=None):
    """Per-replicate normalized sup statistics and their per-n summaries.

    Reuses the rate-scan cells (same derived seeds) but keeps only the
    normalized suprema sup|beta| / (2 log log n)^(1/2) and the PIT-side
    counterpart.
    """
    result = run_rate_scan(config, threads=threads)
    summary = {n: {"median": result.per_n[n]["lil_beta"]["median"],
                   "max": result.per_n[n]["lil_beta"]["max"]}
               for n in config.n_grid}
    if out_dir is not None:
        path = os.path.join(out_dir, "lil_scan.csv")
        os.makedirs(out_dir, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "replicate", "seed", "lil_beta", "lil_u"])
            for r in result.rows:
                w.writerow([r.n, r.replicate, r.seed, repr(r.lil_beta),
                            repr(r.lil_u)])
        spath = os.path.join(out_dir, "lil_summary.csv")
        with open(spath, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "median", "max"])
            for n in config.n_grid:
                w.writerow([n, repr(summary[n]["median"]),
                            repr(summary[n]["max"])])
    return result, summary


# ---------------------------------------------------------------------------
# increment modulus


def increment_modulus(pit_sorted, d, a=0.0, b=1.0, window_cells=512):
    """Grid sup of |g(v) - g(u)| over pairs with |u - v| <= d, for
    g(y) = E_n(y) - y.

    Evaluation points are both one-sided limits at every jump of E_n plus
    a uniform seeding at the cell width d/window_cells; pairs are matched
    through cells, so the result is exact on the point set up to one cell
    width of window slack.
    """
    us = np.asarray(pit_sorted, dtype=float)
    n = us.size
    if not 0.0 < d:
        raise ValueError("window width d must be positive")
    d = min(d, b - a)
    h = d / window_cells
    off = 1e-12
    knots = np.concatenate([
        us - off, us + off,
        np.arange(a + 0.5 * h, b, h),
        [a + off, b - off],
    ])
    knots = np.sort(knots[(knots > a) & (knots < b)])
    g = np.searchsorted(us, knots, side="right") / n - knots

    cells = ((knots - a) / h).astype(np.int64)
    ncells = int(cells[-1]) + 1
    bounds = np.searchsorted(cells, np.arange(ncells + 1))
    has = bounds[1:] > bounds[:-1]
    cmax = np.full(ncells, -np.inf)
    cmin = np.full(ncells, np.inf)
    idx = bounds[:-1][has]
    cmax[has] = np.maximum.reduceat(g, idx)
    cmin[has] = np.minimum.reduceat(g, idx)
    # empty cells inherit a neighbor so the filters stay finite
    if not np.all(has):
        fill = np.where(has)[0]
        nearest = fill[np.clip(np.searchsorted(fill, np.arange(ncells)), 0,
                               fill.size - 1)]
        cmax[~has] = cmax[nearest[~has]]
        cmin[~has] = cmin[nearest[~has]]

    w = int(window_cells)
    size = w + 1
    # forward-looking window [i, i + w]
    fmax = maximum_filter1d(cmax, size=size, origin=-(size // 2),
                            mode="nearest")
    fmin = minimum_filter1d(cmin, size=size, origin=-(size // 2),
                            mode="nearest")
    rise = float((fmax - cmin).max())
    fall = float((cmax - fmin).max())
    return max(rise, fall, 0.0)


@dataclass(frozen=True)
class IncrementRow:
    n: int
    replicate: int
    seed: int
    d_n: float
    modulus: float
    normalized: float


def run_increment_check(config, d_n_rule="lambda_n", threads=1, out_dir=None):
    """Increment modulus of the centered empirical CDF at window d_n.

    d_n_rule is either "lambda_n" (d_n = n^(-1/2) (2 log log n)^(1/2)) or
    a mapping n -> d_n. The modulus is normalized by
    sqrt(d_n log n) / sqrt(n); the second, Lipschitz-driven term of the
    increment bound is negligible at this window choice and is omitted
    from the normalizer.
    """
    model = build_model(config)
    gate_conditions(config, model)
    if d_n_rule == "lambda_n":
        d_of = {n: rate_lambda(n) for n in config.n_grid}
    elif isinstance(d_n_rule, dict):
        d_of = {int(n): float(d) for n, d in d_n_rule.items()}
    else:
        raise ConfigError(f"unknown d_n rule {d_n_rule!r}")
    for n in config.n_grid:
        d = d_of[n]
        if not (0.0 < d <= 1.0):
            raise ConfigError(f"d_n must lie in (0, 1], got {d} at n={n}")
        if n * d / math.log(n) < 10.0:
            raise ConfigError(
                f"window too small at n={n}: need n*d_n/log(n) >= 10, "
                f"got {n * d / math.log(n):.3g}")

    window_cells = int(config.increments.get("window_cells", 512))
    oracle = build_oracle(model, config)
    rows = []
    for n in config.n_grid:
        d = d_of[n]
        norm = math.sqrt(d * math.log(n) / n)
        for r in range(config.replicates):
            seed = mix_seed(config.master_seed, n, r)
            path = simulate_path(model, n, seed, trunc_tol=config.trunc_tol)
            us = np.sort(pit_transform(path, oracle))
            mod = increment_modulus(us, d, window_cells=window_cells)
            rows.append(IncrementRow(n=n, replicate=r, seed=seed, d_n=d,
                                     modulus=mod, normalized=mod / norm))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "increments.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "replicate", "seed", "d_n", "modulus",
                        "normalized"])
            for r in rows:
                w.writerow([r.n, r.replicate, r.seed, repr(r.d_n),
                            repr(r.modulus), repr(r.normalized)])
    return rows


# ---------------------------------------------------------------------------
# covariance cross-check


@dataclass(frozen=True)
class CovarianceCheckRow:
    x: float
    n: int
    replicates: int
    var_emp: float
    var_se: float
    gamma: float
    gamma_se: float
    qq_max_dev: float
    converged: bool


def run_covariance_check(config, x_grid=None, threads=1, out_dir=None):
    """Replicate variance of sqrt(n) N(x) against the estimated Gamma(x, x).

    Also reports a quantile-quantile deviation of the replicate sample
    against the centered Gaussian with the estimated variance.
    """
    model = build_model(config)
    gate_conditions(config, model)
    oracle = build_oracle(model, config)
    cov = config.covariance
    n = int(cov.get("n", 16384))
    reps = int(cov.get("replicates", 1000))
    lag_horizon = int(cov.get("lag_horizon", 8))
    mc_draws = int(cov.get("mc_draws", 4000))
    if x_grid is None:
        x_grid = cov.get("x_grid", [-1.0, 0.0, 1.0])
    x_grid = [float(x) for x in x_grid]

    samples = {x: np.empty(reps) for x in x_grid}
    for r in range(reps):
        seed = mix_seed(config.master_seed, n, r)
        path = simulate_path(model, n, seed, trunc_tol=config.trunc_tol)
        for x in x_grid:
            samples[x][r] = math.sqrt(n) * float(np.mean(
                y_summands(path, oracle, x)))

    rows = []
    probs = np.arange(1, 10) / 10.0
    for ix, x in enumerate(x_grid):
        est = covariance_gamma(
            model, oracle, x, x, lag_horizon=lag_horizon, mc_draws=mc_draws,
            seed=mix_seed(config.master_seed, n, 1_000_000 + ix),
            trunc_tol=config.trunc_tol)
        s = samples[x]
        var_emp = float(np.var(s, ddof=1))
        var_se = var_emp * math.sqrt(2.0 / (reps - 1))
        sd = math.sqrt(max(est.gamma, 0.0))
        qq = float(np.max(np.abs(np.quantile(s, probs) - sd * ndtri(probs))))
        rows.append(CovarianceCheckRow(
            x=x, n=n, replicates=reps, var_emp=var_emp, var_se=var_se,
            gamma=est.gamma, gamma_se=est.stderr, qq_max_dev=qq,
            converged=est.converged))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "covariance.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "n", "replicates", "var_emp", "var_se", "gamma",
                        "gamma_se", "qq_max_dev", "converged"])
            for r in rows:
                w.writerow([repr(r.x), r.n, r.replicates, repr(r.var_emp),
                            repr(r.var_se), repr(r.gamma), repr(r.gamma_se),
                            repr(r.qq_max_dev), int(r.converged)])
    return rows


# ---------------------------------------------------------------------------
# manifest


def write_manifest(config, command, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    import scipy

    seeds = [[n, r, mix_seed(config.master_seed, n, r)]
             for n in config.n_grid for r in range(config.replicates)]
    manifest = {
        "tool": "bklab",
        "version": __version__,
        "command": command,
        "seed_mixing": "seed = splitmix64(splitmix64(master ^ n) ^ replicate)",
        "master_seed": config.master_seed,
        "derived_seeds": seeds,
        "config": config.raw,
        "library_versions": {"numpy": np.__version__,
                             "scipy": scipy.__version__},
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
