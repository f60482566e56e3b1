import math

import numpy as np
import pytest
from scipy.special import ndtr

from bklab.coefficients import (make_finite_coefficients,
                                make_power_law_coefficients)
from bklab.decomp import (TruncatedMarginals, blocked_sums, blocking_layout,
                          covariance_gamma, decompose, gaussian_limit_sample,
                          truncated_summands, y_summands)
from bklab.empirical import EmpiricalSummary, beta_process
from bklab.errors import ModelError, NumericalError
from bklab.innovations import get_innovation
from bklab.model import (LinearProcessModel, build_marginal_oracle,
                         exact_marginal_oracle)
from bklab.paths import pit_transform, simulate_path

SIGMA_MA1 = math.sqrt(1.25)


def gauss_hermite_gamma_ma1(x, y, c1=0.5, nodes=80):
    """Independent quadrature oracle for the MA(1) long-run covariance.

    Lag-0 term by 1-d Gauss-Hermite over the shared predictor innovation;
    lag-1 term by a genuine 2-d tensor quadrature over both innovations
    (it vanishes because the two predictors share no innovation).
    """
    t, w = np.polynomial.hermite.hermgauss(nodes)
    e = math.sqrt(2.0) * t
    w = w / math.sqrt(math.pi)
    sig = math.sqrt(1.0 + c1 * c1)
    fx, fy = ndtr(x / sig), ndtr(y / sig)
    yx = ndtr(x - c1 * e) - fx
    yy = ndtr(y - c1 * e) - fy
    lag0 = float(np.sum(w * yx * yy))
    # 2-d tensor grid for E Y_0(x) Y_1(y): predictors driven by distinct
    # innovations a (for Y_0) and b (for Y_1)
    ya = ndtr(x - c1 * e) - fx
    yb = ndtr(y - c1 * e) - fy
    lag1_xy = float(np.sum(np.outer(w * ya, w * yb)))
    ya2 = ndtr(y - c1 * e) - fy
    yb2 = ndtr(x - c1 * e) - fx
    lag1_yx = float(np.sum(np.outer(w * ya2, w * yb2)))
    return lag0 + lag1_xy + lag1_yx


class TestQuadratureOracle:
    def test_closed_form_at_zero(self):
        # Var(Phi(-c1 eps)) = arcsin(c1^2/(1+c1^2)) / (2 pi)
        expected = math.asin(0.2) / (2.0 * math.pi)
        assert gauss_hermite_gamma_ma1(0.0, 0.0) == pytest.approx(
            expected, rel=1e-10)

    def test_lag_terms_vanish(self):
        # predictors one step apart share no innovation, so the cross
        # terms contribute exactly zero
        g_lag0_only = gauss_hermite_gamma_ma1(0.7, -0.3)
        t, w = np.polynomial.hermite.hermgauss(80)
        e = math.sqrt(2.0) * t
        w = w / math.sqrt(math.pi)
        yx = ndtr(0.7 - 0.5 * e) - ndtr(0.7 / SIGMA_MA1)
        yy = ndtr(-0.3 - 0.5 * e) - ndtr(-0.3 / SIGMA_MA1)
        assert g_lag0_only == pytest.approx(float(np.sum(w * yx * yy)),
                                            abs=1e-12)


class TestDecompose:
    def test_identity_five_models(self, iid_uniform, ma1_gaussian,
                                  powerlaw_gaussian, iid_gaussian):
        logistic = LinearProcessModel(
            innovations=get_innovation("logistic"),
            coefficients=make_finite_coefficients([1.0, 0.4, 0.2]), rho=0.45)
        cases = [iid_uniform, ma1_gaussian, powerlaw_gaussian, iid_gaussian,
                 (logistic, build_marginal_oracle(logistic, 5000, seed=2))]
        for model, oracle in cases:
            p = simulate_path(model, 1000, seed=77)
            xs = EmpiricalSummary.from_sample(p.x)
            qs = np.quantile(p.x, [0.1, 0.3, 0.5, 0.7, 0.9])
            for x in qs:
                d = decompose(p, oracle, x)
                beta = beta_process(xs, oracle, x)
                assert d.beta_check == pytest.approx(beta, abs=1e-12)

    def test_iid_differentiable_part_vanishes(self, iid_uniform):
        model, oracle = iid_uniform
        p = simulate_path(model, 500, seed=3)
        for x in (0.1, 0.5, 0.9):
            d = decompose(p, oracle, x)
            assert d.differentiable == pytest.approx(0.0, abs=1e-15)

    def test_martingale_and_summands_center(self, ma1_gaussian):
        model, oracle = ma1_gaussian
        reps, n = 300, 1024
        xs = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
        m_vals = np.empty((reps, xs.size))
        y_means = np.empty((reps, xs.size))
        for r in range(reps):
            p = simulate_path(model, n, seed=5000 + r)
            for j, x in enumerate(xs):
                d = decompose(p, oracle, x)
                m_vals[r, j] = d.martingale
                y_means[r, j] = float(np.mean(y_summands(p, oracle, x)))
        for arr in (m_vals, y_means):
            mean = arr.mean(axis=0)
            se = arr.std(axis=0, ddof=1) / math.sqrt(reps)
            assert np.all(np.abs(mean) <= 3.0 * se + 1e-12)

    def test_oracle_mismatch(self, ma1_gaussian, iid_uniform):
        model, _ = ma1_gaussian
        _, wrong = iid_uniform
        p = simulate_path(model, 50, seed=1)
        with pytest.raises(ValueError):
            decompose(p, wrong, 0.0)


class TestTruncatedSummands:
    def test_iid_identically_zero(self, iid_uniform):
        model, oracle = iid_uniform
        p = simulate_path(model, 200, seed=9)
        tm = TruncatedMarginals(model, oracle)
        yhat = truncated_summands(p, tm, 0.3, 0.5)
        assert np.all(yhat == 0.0)

    def test_finite_memory_reduces_to_exact(self, ma1_gaussian):
        model, oracle = ma1_gaussian
        p = simulate_path(model, 300, seed=9)
        tm = TruncatedMarginals(model, oracle)
        x = 0.4
        yhat = truncated_summands(p, tm, 0.45, x)
        y = y_summands(p, oracle, x)
        i = np.arange(1, 301)
        full = np.ceil(i ** 0.45) >= 2  # lag 1 retained
        assert np.allclose(yhat[full], y[full], atol=1e-15)

    def test_truncation_l2_slope(self):
        # sample second moment of Y - Y_hat follows the squared-tail decay:
        # log-log slope against i within [-1.3, -0.7] over [1e2, 1e4]
        model = LinearProcessModel(
            innovations=get_innovation("gaussian"),
            coefficients=make_power_law_coefficients(3.0), rho=0.45)
        oracle = exact_marginal_oracle(model)
        tm = TruncatedMarginals(model, oracle)
        n, reps, x = 10_000, 160, 0.0
        probes = np.array([100, 316, 1000, 3162, 9999])
        sq = np.zeros((reps, probes.size))
        for r in range(reps):
            p = simulate_path(model, n, seed=31_000 + r)
            diff = (y_summands(p, oracle, x)
                    - truncated_summands(p, tm, 0.45, x))
            sq[r] = diff[probes - 1] ** 2
        norms = np.sqrt(sq.mean(axis=0))
        slope = np.polyfit(np.log(probes), np.log(norms), 1)[0]
        assert -1.3 <= slope <= -0.7


class TestCovariance:
    def test_iid_gamma_zero(self, iid_uniform):
        model, oracle = iid_uniform
        est = covariance_gamma(model, oracle, 0.3, 0.7, lag_horizon=3,
                               mc_draws=1500, seed=4)
        assert est.gamma == 0.0
        assert est.stderr == 0.0

    def test_ma1_matches_quadrature(self, ma1_gaussian):
        model, oracle = ma1_gaussian
        for x, y in ((0.0, 0.0), (-1.0, -1.0), (0.5, -0.5)):
            est = covariance_gamma(model, oracle, x, y, lag_horizon=4,
                                   mc_draws=20_000, seed=8)
            target = gauss_hermite_gamma_ma1(x, y)
            assert abs(est.gamma - target) < 3.0 * est.stderr

    def test_symmetry_with_shared_seed(self, ma1_gaussian):
        model, oracle = ma1_gaussian
        a = covariance_gamma(model, oracle, -0.4, 0.9, lag_horizon=4,
                             mc_draws=2000, seed=12)
        b = covariance_gamma(model, oracle, 0.9, -0.4, lag_horizon=4,
                             mc_draws=2000, seed=12)
        assert a.gamma == b.gamma

    def test_convergence_flag(self, ma1_gaussian):
        model, oracle = ma1_gaussian
        est = covariance_gamma(model, oracle, 0.0, 0.0, lag_horizon=8,
                               mc_draws=4000, seed=3)
        assert est.converged
        assert est.horizon_warning is None

    def test_variance_link(self, ma1_gaussian):
        # replicate variance of sqrt(n) N(x) against Gamma(x, x)
        model, oracle = ma1_gaussian
        n, reps, x = 4096, 400, 0.0
        vals = np.empty(reps)
        for r in range(reps):
            p = simulate_path(model, n, seed=9000 + r)
            vals[r] = math.sqrt(n) * float(np.mean(y_summands(p, oracle, x)))
        var = float(np.var(vals, ddof=1))
        est = covariance_gamma(model, oracle, x, x, lag_horizon=4,
                               mc_draws=20_000, seed=5)
        se = var * math.sqrt(2.0 / (reps - 1))
        tol = 0.10 * est.gamma + 3.0 * math.hypot(se, est.stderr)
        assert abs(var - est.gamma) < tol


class TestBlocking:
    def test_layout_example(self):
        layout = blocking_layout(100, 0.45)
        assert layout.block_len == 7  # floor(100^0.45)
        assert layout.starts[0] == 1 and layout.ends[0] == 7
        assert layout.ends[-1] == 100
        # partition with no gaps or overlaps
        covered = np.concatenate([np.arange(s, e + 1)
                                  for s, e in zip(layout.starts, layout.ends)])
        assert np.array_equal(covered, np.arange(1, 101))

    def test_too_short(self):
        # block_len = floor(1^rho) = 1 needs at least n = 2
        with pytest.raises(ModelError, match="block pair"):
            blocking_layout(1, 0.45)

    def test_iid_block_sums_zero(self, iid_uniform):
        model, oracle = iid_uniform
        p = simulate_path(model, 200, seed=3)
        tm = TruncatedMarginals(model, oracle)
        u, v, stats = blocked_sums(p, tm, 0.3, 0.2, 0.8)
        assert np.all(u == 0.0) and np.all(v == 0.0)
        assert stats.total_abs == 0.0

    def test_requires_ordered_points(self, iid_uniform):
        model, oracle = iid_uniform
        p = simulate_path(model, 200, seed=3)
        tm = TruncatedMarginals(model, oracle)
        with pytest.raises(ValueError):
            blocked_sums(p, tm, 0.3, 0.8, 0.2)

    def test_exceedance_profile(self):
        from bklab.decomp import exceedance_profile
        totals = [0.1, -0.2, 0.05, 0.3, -0.15]
        z = [0.0, 0.1, 0.2, 0.5]
        freq = exceedance_profile(totals, z)
        assert np.allclose(freq, [1.0, 0.6, 0.2, 0.0])
        assert np.all(np.diff(freq) <= 0)  # nonincreasing in the threshold

    def test_covariance_csv(self, ma1_gaussian):
        import io
        from bklab.decomp import covariance_to_csv
        model, oracle = ma1_gaussian
        est = covariance_gamma(model, oracle, 0.0, 0.5, lag_horizon=2,
                               mc_draws=1000, seed=2)
        buf = io.StringIO()
        covariance_to_csv([est], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "x,y,gamma,stderr,lag_horizon,mc_draws"
        assert lines[1].startswith("0.0,0.5,")

    def test_i_blocks_independent(self):
        # lag-1 correlation of the I-block sums across replicates is zero
        # within Monte Carlo resolution (the J gaps absorb every lag)
        model = LinearProcessModel(
            innovations=get_innovation("gaussian"),
            coefficients=make_power_law_coefficients(3.0), rho=0.45)
        oracle = exact_marginal_oracle(model)
        tm = TruncatedMarginals(model, oracle)
        reps, n = 300, 1000
        firsts, seconds = [], []
        for r in range(reps):
            p = simulate_path(model, n, seed=7000 + r)
            u, _, _ = blocked_sums(p, tm, 0.45, -0.5, 0.5)
            firsts.append(u[:-1])
            seconds.append(u[1:])
        a = np.concatenate(firsts)
        b = np.concatenate(seconds)
        corr = float(np.corrcoef(a, b)[0, 1])
        assert abs(corr) < 4.0 / math.sqrt(a.size)


class TestGaussianLimit:
    def test_zero_matrix(self):
        out = gaussian_limit_sample(np.zeros((3, 3)), seed=1)
        assert np.array_equal(out, np.zeros(3))
        out = gaussian_limit_sample(np.zeros((2, 2)), seed=1, size=5)
        assert np.array_equal(out, np.zeros((5, 2)))

    def test_scalar_variance_concentration(self):
        v = 0.04
        draws = gaussian_limit_sample(np.array([[v]]), seed=2, size=10_000)
        sample_var = float(np.var(draws, ddof=1))
        assert abs(sample_var - v) < 3.0 * v * math.sqrt(2.0 / 10_000)

    def test_recovers_ma1_covariance(self, ma1_gaussian):
        model, oracle = ma1_gaussian
        xs = (0.0, 1.0)
        g = np.empty((2, 2))
        for i, xi in enumerate(xs):
            for j, xj in enumerate(xs):
                g[i, j] = gauss_hermite_gamma_ma1(xi, xj)
        draws = gaussian_limit_sample(g, seed=3, size=10_000)
        emp = np.cov(draws.T)
        for i in range(2):
            for j in range(2):
                se = math.sqrt((g[i, i] * g[j, j] + g[i, j] ** 2) / 10_000)
                assert abs(emp[i, j] - g[i, j]) < 4.0 * se

    def test_rejects_indefinite(self):
        with pytest.raises(NumericalError):
            gaussian_limit_sample(np.array([[1.0, 2.0], [2.0, 1.0]]), seed=1)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            gaussian_limit_sample(np.array([[1.0, 0.2], [0.1, 1.0]]), seed=1)
