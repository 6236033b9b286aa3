"""Channel-power statistics and annulus geometry against simulation and
quadrature oracles."""

import math

import numpy as np
import pytest
from scipy import special as sp
from scipy import stats

from backscatter.channel import (Annulus, FadingModel, fading_cdf, fading_cf,
                                 fading_sf, nth_nearest_mass, nth_nearest_pdf,
                                 product_fading_pdf, sample_fading,
                                 sample_typical_distance, typical_distance_pdf)
from backscatter.numerics import QuadratureSpec, integrate_adaptive

RHO_GRID = (0.0, 0.5, 0.9, 1.0)


def cdf_grid(model, xs):
    """Numeric CDF of the product power on a grid (oracle helper)."""
    return np.array([fading_cdf(x, model) for x in xs])


class TestProductPdf:
    def test_fully_correlated_point(self):
        m = FadingModel(rho=1.0)
        assert product_fading_pdf(1.0, m) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-12)

    def test_uncorrelated_point(self):
        m = FadingModel(rho=0.0)
        assert product_fading_pdf(1.0, m) == pytest.approx(2.0 * sp.k0(2.0), rel=1e-12)

    @pytest.mark.parametrize("rho", RHO_GRID)
    def test_normalization(self, rho):
        m = FadingModel(rho=rho)

        def weight(s):
            return 2.0 * s * product_fading_pdf(s * s, m)

        hi = 0.5 * (1.0 + rho) * 45.0
        res = integrate_adaptive(weight, 0.0, hi,
                                 QuadratureSpec(rel_tol=1e-10, abs_tol=1e-12),
                                 breakpoints=[10.0 ** (-k) for k in range(1, 9)])
        assert res.value.real == pytest.approx(1.0, abs=1e-6)

    def test_invalid_argument(self):
        m = FadingModel(rho=0.5)
        with pytest.raises(ValueError):
            product_fading_pdf(0.0, m)
        with pytest.raises(ValueError):
            product_fading_pdf(-1.0, m)
        with pytest.raises(ValueError):
            product_fading_pdf(1.0, FadingModel(fading_free=True))


class TestCdf:
    def test_closed_form_rho1(self):
        # F(x) = 1 - exp(-sqrt(mu_f mu_b x)), cross-checked by quadrature
        m = FadingModel(rho=1.0)
        for x in (0.05, 0.5, 2.0, 10.0):
            closed = 1.0 - math.exp(-math.sqrt(x))
            assert fading_cdf(x, m) == pytest.approx(closed, abs=1e-12)

        def weight(s):
            return 2.0 * s * product_fading_pdf(s * s, m)

        for x in (0.3, 2.0):
            res = integrate_adaptive(weight, 0.0, math.sqrt(x),
                                     QuadratureSpec(rel_tol=1e-11, abs_tol=1e-13),
                                     breakpoints=[10.0 ** (-k) for k in range(1, 9)])
            assert res.value.real == pytest.approx(1.0 - math.exp(-math.sqrt(x)), abs=1e-8)

    def test_continuity_toward_full_correlation(self):
        # sup-norm CDF distance between rho = 1 - 1e-4 and rho = 1
        near = FadingModel(rho=1.0 - 1e-4)
        xs = np.concatenate([np.linspace(0.01, 4.0, 60), np.linspace(4.5, 20.0, 20)])
        f_near = cdf_grid(near, xs)
        f_one = 1.0 - np.exp(-np.sqrt(xs))
        assert np.max(np.abs(f_near - f_one)) <= 0.01

    def test_sf_complements_cdf(self):
        m = FadingModel(rho=0.5)
        for x in (0.1, 1.0, 5.0):
            assert fading_sf(x, m) + fading_cdf(x, m) == pytest.approx(1.0, abs=1e-8)


class TestCf:
    @pytest.mark.parametrize("rho", (0.0, 0.5, 1.0))
    def test_against_quadrature_oracle(self, rho):
        m = FadingModel(rho=rho)
        for c in (0.3, 1.0, 10.0):
            def f(s):
                return 2.0 * s * product_fading_pdf(s * s, m) * np.exp(1j * c * s * s)

            kmax = int(c * (0.5 * (1 + rho) * 45.0) ** 2 / np.pi)
            bps = [math.sqrt(np.pi * k / c) for k in range(1, min(kmax, 2000))]
            res = integrate_adaptive(f, 0.0, 0.5 * (1 + rho) * 45.0,
                                     QuadratureSpec(rel_tol=1e-10, abs_tol=1e-12,
                                                    max_subdivisions=8000),
                                     breakpoints=[1e-6, 1e-4, 1e-2] + bps)
            assert fading_cf(c, m) == pytest.approx(res.value, rel=2e-9)

    def test_basic_properties(self):
        for rho in RHO_GRID:
            m = FadingModel(rho=rho)
            assert fading_cf(0.0, m) == 1.0
            ts = np.array([0.01, 0.3, 2.0, 40.0, 1e4])
            vals = fading_cf(ts, m)
            assert np.all(np.abs(vals) <= 1.0 + 1e-12)
            # conjugate symmetry
            assert fading_cf(-2.0, m) == pytest.approx(np.conj(fading_cf(2.0, m)), rel=1e-12)

    def test_matches_empirical_cf(self):
        rng = np.random.default_rng(17)
        for rho in (0.0, 0.5, 1.0):
            m = FadingModel(rho=rho)
            h = sample_fading(m, rng, 400_000)
            for c in (1.0, 10.0):
                z = np.exp(1j * c * h)
                emp = z.mean()
                se = max(z.real.std(), z.imag.std()) / math.sqrt(h.size)
                assert abs(fading_cf(c, m) - emp) <= 4.0 * se

    def test_fading_free(self):
        m = FadingModel(fading_free=True)
        assert fading_cf(3.0, m) == pytest.approx(np.exp(3j), rel=1e-15)


class TestSampler:
    def test_mean_uncorrelated(self):
        h = sample_fading(FadingModel(rho=0.0), np.random.default_rng(1), 10**6)
        assert h.mean() == pytest.approx(1.0, abs=0.01)

    def test_mean_fully_correlated(self):
        # h = |g|^4 and E|g|^4 = 2 for a unit-mean exponential |g|^2
        h = sample_fading(FadingModel(rho=1.0), np.random.default_rng(2), 10**6)
        assert h.mean() == pytest.approx(2.0, abs=0.02)

    @pytest.mark.parametrize("rho", (0.0, 0.5, 1.0))
    def test_kolmogorov_smirnov(self, rho):
        m = FadingModel(rho=rho)
        h = sample_fading(m, np.random.default_rng(33), 100_000)
        if rho == 1.0:
            cdf = lambda x: 1.0 - np.exp(-np.sqrt(np.maximum(x, 0.0)))
        else:
            xs = np.concatenate([[0.0], np.geomspace(1e-6, h.max() * 1.01, 400)])
            ys = cdf_grid(m, xs[1:])
            table = np.concatenate([[0.0], ys])
            cdf = lambda x: np.interp(x, xs, table)
        stat = stats.kstest(h, cdf).statistic
        assert stat <= 0.005

    def test_fading_free_consumes_no_draws(self):
        rng_a = np.random.default_rng(9)
        rng_b = np.random.default_rng(9)
        assert sample_fading(FadingModel(fading_free=True), rng_a) == 1.0
        assert rng_a.bit_generator.state == rng_b.bit_generator.state

    def test_deterministic_given_seed(self):
        m = FadingModel(rho=0.7)
        a = sample_fading(m, np.random.default_rng(5), 16)
        b = sample_fading(m, np.random.default_rng(5), 16)
        assert np.array_equal(a, b)


class TestGeometry:
    def test_planar_density_value(self):
        ann = Annulus(zeta=1.0, xi=10.0)
        assert typical_distance_pdf(ann) == pytest.approx(1.0 / (99.0 * math.pi), rel=1e-12)

    def test_samples_in_range(self):
        ann = Annulus(zeta=1.0, xi=10.0)
        r = sample_typical_distance(ann, np.random.default_rng(3), 10_000)
        assert r.min() >= 1.0 and r.max() <= 10.0

    def test_uniform_area_moment(self):
        ann = Annulus(zeta=1.0, xi=10.0)
        r = sample_typical_distance(ann, np.random.default_rng(4), 10**6)
        assert np.mean(r**2) == pytest.approx(50.5, abs=0.1)

    def test_annulus_validation(self):
        with pytest.raises(ValueError):
            Annulus(zeta=0.5, xi=10.0)
        with pytest.raises(ValueError):
            Annulus(zeta=2.0, xi=2.0)


class TestNthNearest:
    def test_point_value(self):
        # n = 1, lambda = 1, zeta = 1 at r = 1: 2 pi r lambda e^0
        assert nth_nearest_pdf(1.0, 1, 1.0, 1.0) == pytest.approx(2.0 * math.pi, rel=1e-12)

    @pytest.mark.parametrize("n", (1, 2, 3))
    def test_normalization(self, n):
        res = integrate_adaptive(lambda r: nth_nearest_pdf(r, n, 1.0, 1.0),
                                 1.0, 6.0, QuadratureSpec(rel_tol=1e-10, abs_tol=1e-13))
        # mass beyond r = 6 is below 1e-30 at unit density
        assert res.value.real == pytest.approx(1.0, abs=1e-9)

    def test_zero_inside_exclusion(self):
        assert nth_nearest_pdf(0.5, 1, 1.0, 1.0) == 0.0

    def test_mass_helper(self):
        assert nth_nearest_mass(1.0, np.inf, 2, 1.0, 1.0) == pytest.approx(1.0, rel=1e-12)
        third = nth_nearest_mass(1.0, 1.5, 1, 1.0, 1.0)
        assert third == pytest.approx(1.0 - math.exp(-math.pi * 1.25), rel=1e-10)

    @pytest.mark.parametrize("n", (1, 2))
    def test_against_simulated_order_statistics(self, n):
        # PPP on a wide annulus; distance to the n-th nearest point
        rng = np.random.default_rng(101)
        lam, zeta, xi = 1.0, 1.0, 30.0
        area = math.pi * (xi**2 - zeta**2)
        reps = 100_000
        counts = rng.poisson(lam * area, reps)
        samples = np.empty(reps)
        total = counts.sum()
        flat = np.sqrt(zeta**2 + rng.random(total) * (xi**2 - zeta**2))
        pos = 0
        for i, c in enumerate(counts):
            seg = flat[pos:pos + c]
            pos += c
            part = np.partition(seg, n - 1)
            samples[i] = part[n - 1]
        xs = np.linspace(zeta, 6.0, 600)
        m = np.pi * lam * (xs**2 - zeta**2)
        cdf_vals = sp.gammainc(n, m)
        cdf = lambda x: np.interp(x, xs, cdf_vals, left=0.0, right=1.0)
        stat = stats.kstest(samples, cdf).statistic
        assert stat <= 0.01

    def test_validation(self):
        with pytest.raises(ValueError):
            nth_nearest_pdf(2.0, 0, 1.0, 1.0)
        with pytest.raises(ValueError):
            nth_nearest_pdf(2.0, 1, 0.0, 1.0)


class TestFadingModelType:
    def test_validation(self):
        with pytest.raises(ValueError):
            FadingModel(rho=1.5)
        with pytest.raises(ValueError):
            FadingModel(mu_f=0.0)

    def test_mean_power(self):
        assert FadingModel(rho=0.5).mean_power == pytest.approx(1.25)
        assert FadingModel(fading_free=True).mean_power == 1.0
