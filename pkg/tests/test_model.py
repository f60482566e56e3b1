import math

import numpy as np
import pytest
from scipy.special import ndtr

from bklab.coefficients import (make_finite_coefficients,
                                make_power_law_coefficients)
from bklab.errors import ModelError
from bklab.innovations import get_innovation
from bklab.model import (LinearProcessModel, build_marginal_oracle,
                         csr_exponents, exact_marginal_oracle,
                         marginal_quantile)

PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


def gaussian_model(values=(1.0, 0.5), **kw):
    return LinearProcessModel(
        innovations=get_innovation("gaussian"),
        coefficients=make_finite_coefficients(list(values)),
        rho=kw.pop("rho", 0.45), **kw)


class TestModelValidation:
    def test_rho_strictly_inside(self):
        for rho in (0.0, 0.5, 0.6, -0.2):
            with pytest.raises(ModelError):
                gaussian_model(rho=rho)

    def test_power_law_couples_rho(self):
        coeffs = make_power_law_coefficients(3.0)
        with pytest.raises(ModelError, match="rho"):
            LinearProcessModel(innovations=get_innovation("gaussian"),
                               coefficients=coeffs, rho=0.2)
        LinearProcessModel(innovations=get_innovation("gaussian"),
                           coefficients=coeffs, rho=0.4)  # boundary accepted

    def test_sigma(self):
        assert gaussian_model().sigma == pytest.approx(math.sqrt(1.25))


class TestMixtureOracle:
    def test_iid_case_is_exact(self):
        model = LinearProcessModel(
            innovations=get_innovation("uniform"),
            coefficients=make_finite_coefficients([1.0]), rho=0.3)
        oracle = build_marginal_oracle(model, mixture_points=10, seed=1)
        x = np.linspace(0.01, 0.99, 37)
        assert np.allclose(oracle.cdf(x), x)
        assert oracle.mixture_points.size == 1  # single zero mixture point

    def test_gaussian_ma1_values(self, ma1_gaussian):
        # exact oracle: F(0) = 1/2, f(0) = phi(0)/sqrt(1.25), Q(.975)
        _, oracle = ma1_gaussian
        assert oracle.cdf(0.0) == pytest.approx(0.5, abs=1e-15)
        assert oracle.pdf(0.0) == pytest.approx(PHI0 / math.sqrt(1.25), rel=1e-12)
        assert marginal_quantile(oracle, 0.975) == pytest.approx(
            2.191306351441454, rel=1e-9)

    def test_mixture_tracks_exact_gaussian(self):
        model = gaussian_model()
        M = 20_000
        oracle = build_marginal_oracle(model, mixture_points=M, seed=5)
        grid = np.linspace(-3.0, 3.0, 41)
        exact = ndtr(grid / model.sigma)
        # Monte Carlo mixture error is below 3/sqrt(M) uniformly
        assert np.max(np.abs(oracle.cdf(grid) - exact)) < 3.0 / math.sqrt(M)
        assert oracle.pdf(0.0) == pytest.approx(PHI0 / math.sqrt(1.25), abs=0.01)

    def test_quantile_roundtrip(self):
        model = gaussian_model()
        oracle = build_marginal_oracle(model, mixture_points=4000, seed=5)
        for y in (1e-6, 0.01, 0.3, 0.5, 0.77, 1.0 - 1e-6):
            q = oracle.quantile(y)
            assert abs(oracle.cdf(q) - y) < 1e-10

    def test_quantile_domain(self, ma1_gaussian):
        _, oracle = ma1_gaussian
        for y in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                oracle.quantile(y)

    def test_q_then_f_consistency(self):
        # Q(F(x)) recovers x wherever the density is not negligible
        model = gaussian_model()
        oracle = build_marginal_oracle(model, mixture_points=4000, seed=5)
        for x in (-2.0, -0.3, 0.0, 1.1, 2.5):
            if oracle.pdf(x) > 1e-6:
                assert oracle.quantile(oracle.cdf(x)) == pytest.approx(x, abs=1e-8)

    def test_small_mixture_warns(self):
        model = gaussian_model()
        oracle = build_marginal_oracle(model, mixture_points=100, seed=2)
        assert oracle.warning is not None

    def test_density_normalizes(self):
        model = gaussian_model()
        oracle = build_marginal_oracle(model, mixture_points=3000, seed=9)
        grid = np.linspace(-8.0, 8.0, 4001)
        mass = float(np.trapezoid(oracle.pdf(grid), grid))
        assert mass == pytest.approx(1.0, abs=1e-4)

    def test_deterministic_rebuild(self):
        model = gaussian_model()
        a = build_marginal_oracle(model, mixture_points=500, seed=3)
        b = build_marginal_oracle(model, mixture_points=500, seed=3)
        assert np.array_equal(a.mixture_points, b.mixture_points)


class TestExactOracle:
    def test_requires_gaussian(self):
        model = LinearProcessModel(
            innovations=get_innovation("logistic"),
            coefficients=make_finite_coefficients([1.0]), rho=0.3)
        with pytest.raises(ModelError):
            exact_marginal_oracle(model)

    def test_median_is_zero(self, ma1_gaussian):
        _, oracle = ma1_gaussian
        assert marginal_quantile(oracle, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_identity_median(self, iid_uniform):
        _, oracle = iid_uniform
        assert marginal_quantile(oracle, 0.5) == pytest.approx(0.5, abs=1e-12)


class TestCsrExponents:
    def test_uniform_flat(self, iid_uniform):
        _, oracle = iid_uniform
        est = csr_exponents(oracle)
        assert abs(est.gamma1) < 0.05
        assert abs(est.gamma2) < 0.05

    def test_gaussian_near_one(self, iid_gaussian):
        _, oracle = iid_gaussian
        est = csr_exponents(oracle)
        assert 0.9 <= est.gamma1 <= 1.15
        assert 0.9 <= est.gamma2 <= 1.15

    def test_exponential_upper_tail(self):
        model = LinearProcessModel(
            innovations=get_innovation("exponential"),
            coefficients=make_finite_coefficients([1.0]), rho=0.3)
        oracle = build_marginal_oracle(model, mixture_points=10, seed=1)
        est = csr_exponents(oracle)
        # f(Q(y)) = 1 - y exactly: flat at 0, slope one at the upper end
        assert abs(est.gamma1) < 0.05
        assert est.gamma2 == pytest.approx(1.0, abs=1e-6)
