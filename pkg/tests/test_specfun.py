"""Special-function and quadrature checks against independent oracles."""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from hetqos.errors import QuadratureError
from hetqos.specfun import (
    QuadratureSpec,
    adaptive_gk_batch,
    bessel_i0,
    bessel_i0e,
    gauss_2f1_interference,
    integrate,
    marcum_q1,
    rician_pdf,
)


def i0_series_oracle(z, terms=30):
    """Independent power-series evaluation of I0."""
    total = 0.0
    term = 1.0
    for k in range(terms):
        if k > 0:
            term *= (z * z / 4.0) / (k * k)
        total += term
    return total


def marcum_integral_oracle(a, b):
    """Direct adaptive quadrature of the defining tail integral."""
    val, _ = scipy.integrate.quad(
        lambda z: z * math.exp(-0.5 * (z * z + a * a)) * scipy.special.i0(a * z),
        b, b + 40.0, limit=200)
    return val


class TestBesselI0:
    def test_at_zero(self):
        assert bessel_i0(0.0) == 1.0

    def test_series_oracle_at_one(self):
        assert bessel_i0(1.0) == pytest.approx(i0_series_oracle(1.0), rel=1e-12)
        assert bessel_i0(1.0) == pytest.approx(1.2660658, rel=1e-7)

    def test_series_oracle_at_ten(self):
        assert bessel_i0(10.0) == pytest.approx(i0_series_oracle(10.0, terms=60),
                                                rel=1e-10)

    def test_monotone_increasing(self):
        z = np.linspace(0, 40, 200)
        v = bessel_i0(z)
        assert np.all(np.diff(v) > 0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            bessel_i0(-1.0)

    def test_overflow_signalled(self):
        with pytest.raises(OverflowError):
            bessel_i0(800.0)

    def test_scaled_variant_consistent(self):
        z = np.array([0.1, 1.0, 12.0, 29.0, 31.0, 250.0])
        assert np.allclose(bessel_i0e(z), scipy.special.i0e(z), rtol=1e-11)


class TestMarcumQ1:
    def test_b_zero_is_one(self):
        for a in (0.0, 0.3, 2.0, 9.0):
            assert marcum_q1(a, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_a_zero_rayleigh_tail(self):
        b = np.array([0.1, 1.0, 2.5, 5.0])
        assert np.allclose(marcum_q1(0.0, b), np.exp(-0.5 * b * b), rtol=1e-12)

    def test_defining_integral_oracle(self):
        for a, b in [(1.0, 1.0), (0.5, 2.0), (3.0, 1.5), (6.0, 7.0)]:
            assert marcum_q1(a, b) == pytest.approx(marcum_integral_oracle(a, b),
                                                    abs=1e-8)

    def test_bounds_and_monotonicity(self):
        rng = np.random.default_rng(1234)
        a = rng.uniform(0, 10, 400)
        b = rng.uniform(0, 10, 400)
        q = marcum_q1(a, b)
        assert np.all(q >= 0) and np.all(q <= 1)
        # decreasing in b, increasing in a
        eps = 1e-4
        assert np.all(marcum_q1(a, b + eps) <= q + 1e-12)
        assert np.all(marcum_q1(a + eps, b) >= q - 1e-12)

    def test_cdf_validity(self):
        # 1 - Q1(a, .) is a CDF: 0 at b=0, nondecreasing, -> 1.
        for a in (0.0, 1.0, 4.0, 20.0, 45.0):
            b = np.linspace(0, a + 20.0, 300)
            cdf = 1.0 - marcum_q1(a, b)
            assert cdf[0] == pytest.approx(0.0, abs=1e-12)
            assert np.all(np.diff(cdf) >= -1e-12)
            assert cdf[-1] == pytest.approx(1.0, abs=1e-10)

    def test_large_argument_band(self):
        # canonical series and quadrature branches agree with the
        # noncentral chi-square representation
        from scipy.stats import ncx2
        rng = np.random.default_rng(7)
        a = rng.uniform(20, 120, 100)
        b = np.clip(a + rng.uniform(-13, 13, 100), 0, None)
        ref = ncx2.sf(b * b, 2, a * a)
        assert np.allclose(marcum_q1(a, b), ref, atol=5e-13)

    def test_domain(self):
        with pytest.raises(ValueError):
            marcum_q1(-0.1, 1.0)


class TestRicianPdf:
    def test_rayleigh_special_case(self):
        b = np.array([0.2, 1.0, 3.0])
        assert np.allclose(rician_pdf(0.0, b), b * np.exp(-0.5 * b * b),
                           rtol=1e-12)

    def test_normalizes(self):
        for a in (0.0, 1.0, 3.0):
            v, _ = integrate(lambda b: rician_pdf(a, b), 0.0, math.inf)
            assert v == pytest.approx(1.0, abs=1e-7)

    def test_derivative_of_cdf(self):
        # d/db [1 - Q1(a, b)] = q(a, b) by central differences
        h = 1e-5
        for a in (0.0, 0.7, 2.5, 5.0):
            for b in (0.3, 1.0, 2.0, 4.0):
                num = (marcum_q1(a, b - h) - marcum_q1(a, b + h)) / (2 * h)
                assert num == pytest.approx(rician_pdf(a, b), abs=1e-6)


class TestGauss2F1Interference:
    def test_at_zero(self):
        assert gauss_2f1_interference(4.0, 0.0) == 1.0

    def test_arctan_closed_form(self):
        # for beta = 4: F(s) = arctan(sqrt(s)) / sqrt(s)
        assert gauss_2f1_interference(4.0, 1.0) == pytest.approx(math.pi / 4,
                                                                 rel=1e-12)
        s = np.logspace(-3, 3, 61)
        f = gauss_2f1_interference(4.0, s)
        assert np.allclose(s * f, np.sqrt(s) * np.arctan(np.sqrt(s)), rtol=1e-7)

    def test_quadrature_oracle_large_s(self):
        # equivalent normalized interference integral
        # F(s) = (1 - 2/beta) * int_0^1 t^{-2/beta} / (1 + s t) dt
        for beta in (3.0, 4.0, 4.7):
            for s in (0.3, 7.0, 100.0):
                ref, _ = scipy.integrate.quad(
                    lambda t: (1 - 2 / beta) * t ** (-2 / beta) / (1 + s * t),
                    0, 1, limit=200)
                assert gauss_2f1_interference(beta, s) == pytest.approx(ref,
                                                                        rel=1e-7)

    def test_divergent_pathloss_rejected(self):
        with pytest.raises(ValueError):
            gauss_2f1_interference(2.0, 1.0)
        with pytest.raises(ValueError):
            gauss_2f1_interference(1.5, 1.0)


class TestIntegrate:
    def test_exponential(self):
        v, e = integrate(lambda x: np.exp(-x), 0.0, math.inf)
        assert v == pytest.approx(1.0, abs=1e-7)

    def test_rayleigh_mean_square(self):
        v, _ = integrate(lambda x: x * np.exp(-0.5 * x * x), 0.0, math.inf)
        assert v == pytest.approx(1.0, abs=1e-7)

    def test_contact_pdf_normalization(self):
        lam = 1e-4
        v, _ = integrate(lambda r: 2 * np.pi * lam * r * np.exp(-np.pi * lam * r * r),
                         0.0, math.inf)
        assert v == pytest.approx(1.0, abs=1e-7)

    def test_gaussian_closed_form(self):
        v, _ = integrate(lambda x: np.exp(-0.5 * x * x), 0.0, math.inf)
        assert v == pytest.approx(math.sqrt(math.pi / 2), rel=1e-7)

    def test_reported_error_bound(self):
        v, e = integrate(lambda x: np.sin(x) ** 2 * np.exp(-x), 0.0, math.inf)
        ref = 0.4  # int_0^inf sin^2 x e^-x dx = 2/(1*5) = 0.4
        assert abs(v - ref) <= max(1e-7 * ref, 1e-10) + e

    def test_nonconvergence_carries_best_estimate(self):
        spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=4)
        with pytest.raises(QuadratureError) as exc:
            integrate(lambda x: np.sqrt(np.abs(x - 0.3141)), 0.0, 1.0, spec)
        assert exc.value.value is not None
        assert exc.value.error is not None

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(rel_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_subdivisions=0)


class TestBatchIntegrator:
    def test_many_problems(self):
        rng = np.random.default_rng(3)
        hi = rng.uniform(0.5, 8.0, 64)
        scale = rng.uniform(0.2, 3.0, 64)

        def f(x, pid):
            return scale[pid] * np.exp(-scale[pid] * x)

        vals = adaptive_gk_batch(f, np.zeros(64), hi, rel_tol=1e-9,
                                 abs_tol=1e-13)
        assert np.allclose(vals, 1 - np.exp(-scale * hi), atol=1e-9)

    def test_zero_width_problem(self):
        vals = adaptive_gk_batch(lambda x, pid: np.ones_like(x),
                                 np.array([0.0, 1.0]), np.array([2.0, 1.0]))
        assert vals[0] == pytest.approx(2.0)
        assert vals[1] == 0.0
