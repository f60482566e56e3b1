"""Quantile-vs-empirical residuals and their rate normalizers.

The residual at y is R(y) = f(Q(y)) * q(y) - alpha(y): how far the scaled
quantile process is from the uniform empirical process after the density
correction. Its classical normalizers (natural logs throughout):

* rate_b(n)               = n^(-1/4) (log n)^(1/2) (log log n)^(1/4)
* rate_lambda(n)          = n^(-1/2) (2 log log n)^(1/2)
* rate_kiefer_pointwise(n) = n^(-1/4) (log log n)^(3/4)

All three require n >= 16, the smallest power of two with log log n > 0.

Suprema over an interval are evaluated on the jump grid (both one-sided
limits at every step discontinuity plus a uniform refinement, default
4n points); a refinement-doubling check is the documented way to confirm
grid convergence on a given model.
"""

import math
from dataclasses import dataclass

import numpy as np

from .empirical import alpha_process, equantile, jump_grid
from .errors import ModelError

DENSITY_FLOOR = 1e-12


def _check_n(n):
    n = int(n)
    if n < 16:
        raise ValueError(f"rate normalizers require n >= 16, got {n}")
    return n


def rate_b(n):
    """n^(-1/4) (log n)^(1/2) (log log n)^(1/4)."""
    n = _check_n(n)
    return n ** -0.25 * math.sqrt(math.log(n)) * math.log(math.log(n)) ** 0.25


def rate_lambda(n):
    """n^(-1/2) (2 log log n)^(1/2)."""
    n = _check_n(n)
    return math.sqrt(2.0 * math.log(math.log(n))) / math.sqrt(n)


def rate_kiefer_pointwise(n):
    """n^(-1/4) (log log n)^(3/4)."""
    n = _check_n(n)
    return n ** -0.25 * math.log(math.log(n)) ** 0.75


def csr_nu_min(gamma):
    """Minimum admissible weight exponent: max(2*gamma, 3*gamma - 2).

    Defined for gamma >= 1 (below that the weighted bound does not apply).
    """
    gamma = float(gamma)
    if gamma < 1.0:
        raise ValueError(f"weight threshold needs gamma >= 1, got {gamma}")
    return max(2.0 * gamma, 3.0 * gamma - 2.0)


@dataclass(frozen=True)
class ResidualSeries:
    """Residual values on a y-grid with plain and weighted suprema."""

    y_grid: np.ndarray
    values: np.ndarray
    sup_abs: float
    weighted_sup: float
    nu: float
    interval: tuple
    n: int
    seed: int | None = None

    def to_csv(self, fh):
        a, b = self.interval
        fh.write(f"# n={self.n} seed={self.seed} a={a!r} b={b!r} nu={self.nu!r}\n")
        fh.write("y,residual,weight,weighted_abs\n")
        w = _weight(self.y_grid, self.nu)
        for y, r, wi in zip(self.y_grid, self.values, w):
            fh.write(f"{float(y)!r},{float(r)!r},{float(wi)!r},"
                     f"{float(abs(r) * wi)!r}\n")


def _weight(y, nu):
    if nu == 0.0:
        return np.ones_like(y)
    return (y * (1.0 - y)) ** nu


def residual_values(summary, pit_summary, oracle, y):
    """R(y) = f(Q(y)) q(y) - alpha(y), vectorized over y."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    n = summary.n
    qy = np.asarray(oracle.quantile(y_arr), dtype=float)
    fq = np.asarray(oracle.pdf(qy), dtype=float)
    if np.any(fq < DENSITY_FLOOR):
        bad = float(y_arr[np.argmin(fq)])
        raise ModelError(
            f"density at Q({bad:.6g}) is below {DENSITY_FLOOR:g}: the "
            "density must stay bounded away from zero on the working interval")
    q = math.sqrt(n) * (qy - equantile(summary, y_arr))
    return fq * q - alpha_process(pit_summary, y_arr)


def residual_pointwise(summary, pit_summary, oracle, y):
    """Residual at a single interior point y."""
    y = float(y)
    if not (0.0 < y < 1.0):
        raise ValueError("y must lie strictly in (0, 1)")
    return float(residual_values(summary, pit_summary, oracle, np.array([y]))[0])


def residual_sup(summary, pit_summary, oracle, a, b, refine=None, seed=None):
    """Residual series and sup of |R| over the jump grid of (a, b)."""
    n = summary.n
    if refine is None:
        refine = 4 * n
    grid = jump_grid(pit_summary, a, b, refine)
    vals = residual_values(summary, pit_summary, oracle, grid)
    sup = float(np.abs(vals).max())
    return ResidualSeries(y_grid=grid, values=vals, sup_abs=sup,
                          weighted_sup=sup, nu=0.0, interval=(a, b),
                          n=n, seed=seed)


def weighted_residual_sup(summary, pit_summary, oracle, nu, refine=None,
                          gamma=None, seed=None):
    """Weighted sup of (y(1-y))^nu |R(y)| over (1/(n+1), n/(n+1)).

    The weight exponent must exceed max(2*gamma, 3*gamma - 2) for the
    model's gamma = min(gamma1, gamma2) >= 1; gamma is read from the
    oracle metadata unless passed explicitly.
    """
    if gamma is None:
        if oracle.gamma1 is None or oracle.gamma2 is None:
            raise ModelError(
                "weighted residual needs the model's endpoint exponents "
                "gamma1/gamma2 (set them on the model or pass gamma=)")
        gamma = min(oracle.gamma1, oracle.gamma2)
    threshold = csr_nu_min(gamma)
    if not nu > threshold:
        raise ModelError(
            f"weight exponent nu={nu} is not admissible for gamma={gamma}: "
            f"need nu > max(2*gamma, 3*gamma - 2) = {threshold}")

    n = summary.n
    if refine is None:
        refine = 4 * n
    a, b = 1.0 / (n + 1), n / (n + 1.0)
    grid = jump_grid(pit_summary, a, b, refine)
    vals = residual_values(summary, pit_summary, oracle, grid)
    w = _weight(grid, nu)
    return ResidualSeries(y_grid=grid, values=vals,
                          sup_abs=float(np.abs(vals).max()),
                          weighted_sup=float((w * np.abs(vals)).max()),
                          nu=float(nu), interval=(a, b), n=n, seed=seed)
