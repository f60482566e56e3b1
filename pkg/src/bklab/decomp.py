"""Martingale/differentiable split of the empirical CDF and its limit
covariance.

At a point x the centered empirical CDF splits exactly into

    F_n(x) - F(x) = M(x) + N(x),
    M(x) = (1/n) sum_i [1{X_i <= x} - F_eps(x - P_i)],
    N(x) = (1/n) sum_i [F_eps(x - P_i) - F(x)],

with P_i the one-step predictor: M collects conditionally centered
indicators (a martingale average), N the smooth conditional-CDF part.
The summand Y_i(x) = F_eps(x - P_i) - F(x) has mean zero; its long-run
covariance

    Gamma(x, y) = E Y_0(x) Y_0(y) + sum_{i>=1} [E Y_0(x) Y_i(y)
                                                + E Y_0(y) Y_i(x)]

is the variance function of the Gaussian limit of sqrt(n) N(x) and is
estimated here by Monte Carlo over joint predictor draws with a
horizon-doubling convergence check.

Per-index truncation (lags below i^rho) yields the finite-memory
companions Y-hat used by the alternating blocking layout, whose I-block
sums are exactly independent by construction.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ndtr

from .coefficients import truncation_horizon
from .errors import ModelError, NumericalError
from .paths import truncate_path, truncation_lags

# ---------------------------------------------------------------------------
# exact decomposition


@dataclass(frozen=True)
class DecompositionAt:
    x: float
    martingale: float       # M(x)
    differentiable: float   # N(x)
    beta_check: float       # sqrt(n) (M + N)


def decompose(path, oracle, x):
    """Evaluate the exact split at a point x.

    ``beta_check`` equals the empirical process beta(x) up to float
    rounding (1e-12 scale): the split is algebra, not asymptotics.
    """
    if oracle.model_id != path.model_id:
        raise ValueError("oracle does not match the path's model")
    if path.pred is None or path.pred.size != path.n:
        raise ValueError("path does not retain its predictors")
    x = float(x)
    f_eps = path.model.innovations.cdf
    cond = np.asarray(f_eps(x - path.pred), dtype=float)
    ind = (path.x <= x).astype(float)
    m = float(np.mean(ind - cond))
    nn = float(np.mean(cond) - float(oracle.cdf(x)))
    return DecompositionAt(x=x, martingale=m, differentiable=nn,
                           beta_check=math.sqrt(path.n) * (m + nn))


def y_summands(path, oracle, x):
    """Y_i(x) = F_eps(x - P_i) - F(x) for the full path."""
    f_eps = path.model.innovations.cdf
    return np.asarray(f_eps(float(x) - path.pred), dtype=float) - float(oracle.cdf(x))


# ---------------------------------------------------------------------------
# truncated summands


class TruncatedMarginals:
    """CDFs of the lag-truncated process, one per retained-lag count.

    For Gaussian innovations the CDF is exact; otherwise each lag count
    gets its own Monte Carlo mixture (cached). A lag count that retains
    every nonzero coefficient serves the full-marginal oracle so the
    truncated summands reduce to the exact ones.
    """

    def __init__(self, model, oracle, mixture_points=20_000, seed=1):
        self.model = model
        self.oracle = oracle
        self.mixture_points = int(mixture_points)
        self.seed = int(seed)
        self._cache = {}

    def cdf(self, lag_count, x):
        """P(X-hat <= x) where X-hat keeps lags 0 .. lag_count-1."""
        L = int(lag_count)
        if L < 1:
            raise ValueError("lag count must be at least 1")
        innov = self.model.innovations
        coeffs = self.model.coefficients
        if coeffs.tail_sq(L) == 0.0:
            return self.oracle.cdf(x)
        if L == 1:
            return innov.cdf(x)
        if innov.name == "gaussian":
            var = coeffs.tail_sq(0) - coeffs.tail_sq(L)
            return ndtr(np.asarray(x, dtype=float)
                        / (innov.scale * math.sqrt(var)))
        s = self._cache.get(L)
        if s is None:
            rng = np.random.default_rng(self.seed + L)
            w = coeffs.weights(L - 1)[1:]
            s = innov.sample(rng, (self.mixture_points, w.size)) @ w
            self._cache[L] = s
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = innov.cdf(x_arr[:, None] - s[None, :]).mean(axis=1)
        return float(out[0]) if np.asarray(x).shape == () else out


def truncated_summands(path, trunc_marginals, rho, x):
    """Y-hat_i(x) = F_eps(x - P-hat_i) - F-hat_i(x) for the whole path.

    P-hat_i is the predictor restricted to lags 1 .. ceil(i^rho) - 1 and
    F-hat_i the CDF of the correspondingly truncated process, so each
    summand is exactly centered.
    """
    truncated = truncate_path(path, rho)
    x = float(x)
    lags = truncation_lags(path.n, rho, path.lag_horizon + 1)
    out = np.asarray(path.model.innovations.cdf(x - truncated.pred),
                     dtype=float)
    for L in np.unique(lags):
        out[lags == L] -= trunc_marginals.cdf(int(L), x)
    return out


# ---------------------------------------------------------------------------
# limit covariance


@dataclass(frozen=True)
class CovarianceEstimate:
    x: float
    y: float
    gamma: float
    lag_horizon: int
    mc_draws: int
    stderr: float
    gamma_half_horizon: float
    converged: bool

    @property
    def horizon_warning(self):
        if self.converged:
            return None
        return (f"halving the lag horizon moves gamma by "
                f"{abs(self.gamma - self.gamma_half_horizon):.3g} "
                f"> 2 * stderr = {2 * self.stderr:.3g}; increase lag_horizon")


def covariance_gamma(model, oracle, x, y, lag_horizon=8, mc_draws=4000,
                     seed=11, trunc_tol=None):
    """Monte Carlo estimate of Gamma(x, y).

    Draws ``mc_draws`` independent predictor windows P_0 .. P_L, forms
    the summands at x and y, and averages the per-draw series
    Y_0(x)Y_0(y) + sum_{i=1..L} [Y_0(x)Y_i(y) + Y_0(y)Y_i(x)]. The
    reported stderr is the across-draw standard error; ``converged``
    compares the estimate against the half-horizon partial sum.
    """
    L = int(lag_horizon)
    R = int(mc_draws)
    if L < 1:
        raise ValueError("lag_horizon must be at least 1")
    if R < 1000:
        raise ValueError("mc_draws must be at least 1000")
    innov = model.innovations
    coeffs = model.coefficients
    if trunc_tol is None:
        trunc_tol = 1e-6 * max(model.sigma, 1e-12)
    K = truncation_horizon(coeffs, trunc_tol / max(innov.scale, 1e-300))

    rng = np.random.default_rng(seed)
    if K == 0:
        pred = np.zeros((R, L + 1))
    else:
        eps = innov.sample(rng, (R, K + L))
        kernel = coeffs.weights(K)[1:]
        # predictor at positions 0..L from each row of innovations
        pred = fftconvolve(eps, kernel[None, :], axes=1)[:, K - 1:K + L]

    def summands(pt):
        return (np.asarray(innov.cdf(float(pt) - pred), dtype=float)
                - float(oracle.cdf(pt)))

    yx = summands(x)
    yy = yx if y == x else summands(y)

    terms = np.empty((R, L + 1))
    terms[:, 0] = yx[:, 0] * yy[:, 0]
    for i in range(1, L + 1):
        terms[:, i] = yx[:, 0] * yy[:, i] + yy[:, 0] * yx[:, i]
    per_draw = terms.sum(axis=1)
    gamma = float(per_draw.mean())
    stderr = float(per_draw.std(ddof=1) / math.sqrt(R))
    half = float(terms[:, :L // 2 + 1].sum(axis=1).mean())
    return CovarianceEstimate(
        x=float(x), y=float(y), gamma=gamma, lag_horizon=L, mc_draws=R,
        stderr=stderr, gamma_half_horizon=half,
        converged=bool(abs(gamma - half) < 2.0 * stderr + 1e-15))


def covariance_to_csv(estimates, fh):
    """Serialize covariance estimates: x, y, gamma, stderr, L, mc_draws."""
    fh.write("x,y,gamma,stderr,lag_horizon,mc_draws\n")
    for e in estimates:
        fh.write(f"{e.x!r},{e.y!r},{e.gamma!r},{e.stderr!r},"
                 f"{e.lag_horizon},{e.mc_draws}\n")


# ---------------------------------------------------------------------------
# alternating blocks


@dataclass(frozen=True)
class BlockingLayout:
    """Alternating I/J blocks of length floor(n^rho) partitioning [1, n]."""

    n: int
    rho: float
    block_len: int
    starts: np.ndarray  # 1-based start index of each block
    ends: np.ndarray    # 1-based inclusive end index

    @property
    def pair_count(self):
        return len(self.starts) // 2

    def block(self, j):
        """Zero-based slice bounds of block j into a length-n array."""
        return int(self.starts[j]) - 1, int(self.ends[j])


def blocking_layout(n, rho):
    n = int(n)
    if not (0.0 < rho < 0.5):
        raise ModelError(f"rho must lie strictly in (0, 1/2), got {rho}")
    block_len = int(math.floor(n ** rho))
    if n < 2 * block_len:
        raise ModelError(
            f"n={n} is too short for one full block pair of length {block_len}")
    starts = np.arange(1, n + 1, block_len, dtype=np.int64)
    ends = np.minimum(starts + block_len - 1, n)
    return BlockingLayout(n=n, rho=rho, block_len=block_len,
                          starts=starts, ends=ends)


@dataclass(frozen=True)
class BlockTailStats:
    total_abs: float
    max_block_abs: float
    block_len: int
    pair_count: int


def blocked_sums(path, trunc_marginals, rho, x, y):
    """Per-block sums of Y-hat_i(x, y) = Y-hat_i(y) - Y-hat_i(x).

    Returns (U, V, stats): U over the odd-position blocks I_k, V over the
    even-position blocks J_k. The I sums are mutually independent for the
    truncated process because the J gaps absorb every retained lag.
    """
    if not x < y:
        raise ValueError("need x < y")
    layout = blocking_layout(path.n, rho)
    d = (truncated_summands(path, trunc_marginals, rho, y)
         - truncated_summands(path, trunc_marginals, rho, x))
    cum = np.concatenate([[0.0], np.cumsum(d)])
    sums = cum[layout.ends] - cum[layout.starts - 1]
    u = sums[0::2]
    v = sums[1::2]
    stats = BlockTailStats(
        total_abs=float(abs(d.sum())),
        max_block_abs=float(np.abs(sums).max()),
        block_len=layout.block_len,
        pair_count=layout.pair_count)
    return u, v, stats


def exceedance_profile(totals, z_grid):
    """Empirical exceedance frequencies of replicate totals over thresholds.

    Diagnostic for the tail-envelope shape: returns the fraction of
    |totals| exceeding each z (the envelope predicts a power-law piece in
    z and Gaussian and exponential pieces in z^2/n and z/n^rho).
    """
    t = np.abs(np.asarray(totals, dtype=float))
    z = np.asarray(z_grid, dtype=float)
    return np.array([(t > zi).mean() for zi in z])


# ---------------------------------------------------------------------------
# Gaussian limit sampling


def gaussian_limit_sample(gamma_matrix, seed, size=None, jitter_scale=1e-10):
    """Draw from the centered Gaussian with covariance Gamma on a grid.

    A diagonal jitter of jitter_scale * trace/d absorbs the sampling
    error of Monte Carlo Gamma estimates; a matrix that fails to
    factorize beyond that signals an inconsistent estimate.
    """
    g = np.asarray(gamma_matrix, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gamma_matrix must be square")
    if not np.allclose(g, g.T, atol=1e-12, rtol=0.0):
        raise ValueError("gamma_matrix must be symmetric")
    d = g.shape[0]
    rng = np.random.default_rng(seed)
    shape = (d,) if size is None else (int(size), d)
    trace = float(np.trace(g))
    if trace == 0.0 and np.all(g == 0.0):
        return np.zeros(shape)
    jitter = jitter_scale * trace / d
    try:
        chol = np.linalg.cholesky(g + jitter * np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "covariance grid is not positive semidefinite beyond the "
            "jitter tolerance; the Gamma estimate is inconsistent") from exc
    z = rng.standard_normal(shape)
    return z @ chol.T
