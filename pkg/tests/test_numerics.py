"""Special-function and quadrature primitives against independent oracles."""

import math

import numpy as np
import pytest

from backscatter.numerics import (ConvergenceError, QuadratureSpec,
                                  bessel_i0, bessel_k0, integrate_adaptive,
                                  integrate_semi_infinite, principal_power,
                                  upper_gamma)


def i0_series(x, terms=60):
    """Power-series oracle: sum (x/2)^{2k} / (k!)^2."""
    total, term = 0.0, 1.0
    for k in range(terms):
        total += term
        term *= (x / 2.0) ** 2 / (k + 1) ** 2
    return total


def k0_integral(x):
    """Integral-representation oracle: int_0^inf exp(-x cosh t) dt."""
    res = integrate_semi_infinite(lambda t: np.exp(-x * np.cosh(t)), 0.0,
                                  QuadratureSpec(rel_tol=1e-13, abs_tol=1e-15),
                                  initial_width=0.5, growth=1.3)
    return res.value.real


def gamma_contour(a, z, length=60.0):
    """Brute-force contour oracle: int_z^{z+len} t^{a-1} e^{-t} dt along
    the positive-real direction."""
    def f(s):
        t = z + s
        return t ** (a - 1.0) * np.exp(-t)

    res = integrate_adaptive(f, 0.0, length,
                             QuadratureSpec(rel_tol=1e-13, abs_tol=1e-16),
                             breakpoints=[10.0 ** (-k) for k in range(1, 10)])
    return res.value


class TestBessel:
    def test_i0_known_values(self):
        assert bessel_i0(0.0) == 1.0
        assert bessel_i0(1.0) == pytest.approx(1.2660658778, abs=1e-9)
        assert bessel_i0(10.0) == pytest.approx(2815.7166284, abs=2e-6)

    def test_i0_vs_series_oracle(self):
        for x in (0.3, 1.0, 2.5, 7.0, 10.0, 20.0):
            assert bessel_i0(x) == pytest.approx(i0_series(x), rel=1e-13)

    def test_k0_known_values(self):
        assert bessel_k0(1.0) == pytest.approx(0.4210244382, abs=1e-9)
        assert bessel_k0(2.0) == pytest.approx(0.1138938727, abs=1e-9)

    def test_k0_vs_integral_oracle(self):
        for x in (0.1, 0.5, 1.0, 3.0, 8.0):
            assert bessel_k0(x) == pytest.approx(k0_integral(x), rel=1e-10)

    def test_k0_log_divergence_near_zero(self):
        assert bessel_k0(1e-12) > 25.0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bessel_i0(-1.0)
        with pytest.raises(ValueError):
            bessel_i0(float("nan"))
        with pytest.raises(ValueError):
            bessel_k0(0.0)
        with pytest.raises(ValueError):
            bessel_k0(-2.0)

    def test_oracle_cross_accuracy(self):
        # no I1/K1 in the public surface, so the Wronskian check is
        # replaced by direct oracle validation at 1e-10
        rng = np.random.default_rng(5)
        for x in rng.uniform(0.05, 30.0, 25):
            assert abs(bessel_i0(x) - i0_series(x, 80)) <= 1e-10 * i0_series(x, 80)
            assert abs(bessel_k0(x) - k0_integral(x)) <= 1e-10 * max(k0_integral(x), 1e-30)


class TestUpperGamma:
    def test_a_one_is_exponential(self):
        for x in (0.1, 1.0, 5.0, 20.0):
            assert upper_gamma(1.0, x) == pytest.approx(math.exp(-x), rel=1e-12)

    def test_recurrence_over_domain(self):
        # Gamma[a+1, z] = a Gamma[a, z] + z^a e^{-z} on the sampled domain
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(1000):
            a = rng.uniform(-1.0, 1.0)
            if abs(a) < 1e-3:
                continue
            mag = 10.0 ** rng.uniform(-3, 3)
            ang = rng.choice([0.0, np.pi / 2, -np.pi / 2])
            z = mag * np.exp(1j * ang)
            lhs = upper_gamma(a + 1.0, z)
            rhs = a * upper_gamma(a, z) + principal_power(z, a) * np.exp(-z)
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        assert worst <= 1e-8

    def test_small_z_asymptotic_negative_order(self):
        # Gamma[a, z] ~ -z^a / a as z -> 0 for a < 0.  The remainder is
        # the constant Gamma(a), so the relative deviation scales as
        # |z|^{-a}: the 1e-4 bound at |z| = 1e-6 is attainable for a
        # near -1; for milder orders assert the vanishing trend.
        def ratio(a, z):
            lead = -principal_power(z, a) / a
            return abs(upper_gamma(a, z) - lead) / abs(lead)

        for ang in (0.0, np.pi / 2, -np.pi / 2):
            assert ratio(-0.9, 1e-6 * np.exp(1j * ang)) <= 1e-4
        for a in (-0.9, -0.4, -0.1):
            theory = abs(math.gamma(a) * a) * (1e-6) ** (-a)
            for ang in (0.0, np.pi / 2, -np.pi / 2):
                rs = [ratio(a, m * np.exp(1j * ang)) for m in (1e-2, 1e-4, 1e-6)]
                assert rs[2] < rs[1] < rs[0]
                assert rs[2] <= 1.1 * theory

    def test_real_argument_gives_real_value(self):
        for a in (-0.4, 0.8, 1.5):
            for x in (1e-3, 0.5, 3.0, 40.0, 900.0):
                g = upper_gamma(a, x)
                assert abs(g.imag) <= 1e-12 * max(abs(g), 1e-300)

    def test_contour_oracle_golden(self):
        # brute-force contour integration, recorded as golden
        golden = -0.24748283240981656 + 0.16790868091908728j
        live = gamma_contour(-0.4, 2j)
        assert abs(live - golden) <= 1e-12
        assert abs(upper_gamma(-0.4, 2j) - golden) <= 1e-10
        assert abs(upper_gamma(-0.4, 2j) - live) <= 1e-10

    def test_zero_argument(self):
        assert upper_gamma(0.8, 0.0) == pytest.approx(math.gamma(0.8), rel=1e-12)
        with pytest.raises(ValueError):
            upper_gamma(-0.4, 0.0)

    def test_invalid_order(self):
        for a in (0.0, -1.0, -3.0):
            with pytest.raises(ValueError):
                upper_gamma(a, 1.0 + 1j)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            upper_gamma(0.5, complex("inf"))


class TestPrincipalPower:
    def test_root_of_i(self):
        val = principal_power(1j, 1.0 / 2.5)
        assert val == pytest.approx(0.8090169944 + 0.5877852523j, abs=1e-9)

    def test_identity(self):
        for p in (-2.0, 0.3, 7.0):
            assert principal_power(1.0, p) == pytest.approx(1.0, rel=1e-15)

    def test_branch_at_negative_real_axis(self):
        # arg(-1) = +pi on the principal branch
        assert principal_power(-1.0 + 0j, 0.5) == pytest.approx(1j, abs=1e-15)

    def test_zero_base(self):
        assert principal_power(0.0, 2.0) == 0.0
        with pytest.raises(ValueError):
            principal_power(0.0, -1.0)


class TestIntegrateAdaptive:
    def test_linear(self):
        res = integrate_adaptive(lambda x: x, 0.0, 1.0)
        assert res.value.real == pytest.approx(0.5, abs=1e-12)

    def test_sine(self):
        res = integrate_adaptive(np.sin, 0.0, np.pi)
        assert res.value.real == pytest.approx(2.0, rel=1e-10)

    def test_log_endpoint_singularity(self):
        res = integrate_adaptive(lambda x: np.log(1.0 / x), 0.0, 1.0)
        assert res.value.real == pytest.approx(1.0, abs=1e-9)

    def test_tolerance_halving_does_not_hurt(self):
        errs = []
        for rel in (1e-6, 5e-7, 2.5e-7):
            spec = QuadratureSpec(rel_tol=rel, abs_tol=1e-15)
            res = integrate_adaptive(np.sin, 0.0, np.pi, spec)
            errs.append(abs(res.value.real - 2.0))
        assert errs[1] <= errs[0] + 1e-12
        assert errs[2] <= errs[1] + 1e-12

    def test_budget_exhaustion_carries_best_estimate(self):
        spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=4)
        with pytest.raises(ConvergenceError) as exc:
            integrate_adaptive(lambda x: np.sin(40.0 * x) / (x + 1e-3), 0.0, 3.0, spec)
        assert exc.value.result is not None
        assert np.isfinite(exc.value.result.value.real)

    def test_vector_valued_integrand(self):
        # two integrands on a shared grid
        res = integrate_adaptive(lambda x: np.stack([x, x * x], axis=1), 0.0, 1.0)
        assert res.value[0].real == pytest.approx(0.5, abs=1e-12)
        assert res.value[1].real == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            integrate_adaptive(np.sin, 1.0, 0.0)


class TestIntegrateSemiInfinite:
    def test_exponential(self):
        res = integrate_semi_infinite(lambda t: np.exp(-t), 0.0)
        assert res.value.real == pytest.approx(1.0, abs=1e-10)
        assert res.truncated_at > 10.0

    def test_sinc_dirichlet(self):
        # slowly decaying oscillation: exercises Wynn acceleration
        res = integrate_semi_infinite(lambda t: np.sinc(t / np.pi), 0.0,
                                      period_hint=2.0 * np.pi)
        assert res.value.real == pytest.approx(np.pi / 2.0, abs=1e-8)

    def test_damped_cosine(self):
        res = integrate_semi_infinite(lambda t: np.exp(-t) * np.cos(t), 0.0)
        assert res.value.real == pytest.approx(0.5, abs=1e-10)

    def test_tolerance_halving_does_not_hurt(self):
        errs = []
        for rel in (1e-6, 5e-7):
            spec = QuadratureSpec(rel_tol=rel, abs_tol=1e-14)
            res = integrate_semi_infinite(lambda t: np.exp(-t), 0.0, spec)
            errs.append(abs(res.value.real - 1.0))
        assert errs[1] <= errs[0] + 1e-12

    def test_divergent_envelope_fails(self):
        spec = QuadratureSpec(rel_tol=1e-8, abs_tol=1e-10)
        with pytest.raises(ConvergenceError):
            integrate_semi_infinite(lambda t: 1.0 / (1.0 + t), 0.0, spec,
                                    max_panels=60)


class TestQuadratureSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(rel_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=-1.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_subdivisions=0)
        with pytest.raises(ValueError):
            QuadratureSpec(truncation_threshold=0.0)
