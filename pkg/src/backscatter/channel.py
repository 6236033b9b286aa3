"""Dyadic backscatter channel statistics and sensor geometry.

The forward and backscatter links are Rayleigh with inverse variances
mu_f, mu_b and amplitude correlation rho; the composite channel power is
the product of the two link powers.  This module provides the product
density (with its closed form at rho = 1), the numeric CDF/survival
function, the characteristic function of the channel power, amplitude-
level samplers, and the distance distributions on the reading annulus
(planar-uniform typical distance, n-th nearest point beyond the
exclusion zone).

All samplers take an explicit numpy Generator and are deterministic
functions of (parameters, generator state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .numerics import QuadratureSpec, integrate_adaptive

__all__ = [
    "FadingModel",
    "Annulus",
    "product_fading_pdf",
    "fading_cdf",
    "fading_sf",
    "fading_cf",
    "sample_fading",
    "typical_distance_pdf",
    "sample_typical_distance",
    "nth_nearest_pdf",
    "nth_nearest_mass",
]


@dataclass(frozen=True)
class FadingModel:
    """Correlated product-Rayleigh fading, or no fading at all.

    rho is the amplitude correlation between the forward and backscatter
    links (the corresponding power correlation is rho**2).  With
    fading_free the channel power is identically 1 regardless of rho.
    """

    rho: float = 1.0
    mu_f: float = 1.0
    mu_b: float = 1.0
    fading_free: bool = False

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError("FadingModel: rho must lie in [0, 1]")
        if not (self.mu_f > 0 and self.mu_b > 0):
            raise ValueError("FadingModel: mu_f and mu_b must be positive")

    @property
    def mean_power(self):
        """E[h] of the product channel (1 + rho^2 for unit link powers)."""
        if self.fading_free:
            return 1.0
        return (1.0 + self.rho**2) / (self.mu_f * self.mu_b)


@dataclass(frozen=True)
class Annulus:
    """Reading zone: exclusion radius zeta, maximum reading distance xi."""

    zeta: float
    xi: float

    def __post_init__(self):
        # zeta >= 1 keeps the harvested energy below the transmit power
        if not (self.xi > self.zeta >= 1.0):
            raise ValueError("Annulus: require xi > zeta >= 1")

    @property
    def area(self):
        return math.pi * (self.xi**2 - self.zeta**2)


def product_fading_pdf(h, model):
    """Density of the product channel power h = |h_f|^2 |h_b|^2.

    Uses the I0*K0 product form for rho in [0, 1) and the closed
    exponential form at rho = 1; the two branches meet continuously.
    Evaluated with exponentially scaled Bessel functions so rho close to
    1 does not overflow.  h must be strictly positive (the density has
    an integrable singularity at 0).
    """
    if model.fading_free:
        raise ValueError("product_fading_pdf: undefined in fading-free mode")
    arr = np.asarray(h, dtype=float)
    scalar = np.isscalar(h) or arr.ndim == 0
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("product_fading_pdf: h must be positive and finite")
    mu = model.mu_f * model.mu_b
    root = np.sqrt(mu * arr)
    rho = model.rho
    if rho == 1.0:
        out = 0.5 * np.sqrt(mu / arr) * np.exp(-root)
    else:
        c = 1.0 - rho**2
        # I0(2 rho root / c) K0(2 root / c) = i0e * k0e * exp(-2 root / (1 + rho))
        out = (2.0 * mu / c) * _sp.i0e(2.0 * rho * root / c) * _sp.k0e(2.0 * root / c) \
            * np.exp(-2.0 * root / (1.0 + rho))
    return float(out) if scalar else out


_CDF_SPEC = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-14, max_subdivisions=4000)


def _sqrt_weight(model, s):
    """2 s f_h(s^2): the product density under the substitution h = s^2."""
    return 2.0 * s * product_fading_pdf(s * s, model)


def _tail_cut(model):
    """s beyond which the sqrt-substituted density mass is negligible."""
    return 0.5 * (1.0 + model.rho) * 42.0 / math.sqrt(model.mu_f * model.mu_b)


def fading_cdf(x, model):
    """P(h <= x), exact at rho = 1, numeric quadrature otherwise."""
    x = float(x)
    if x <= 0:
        return 0.0
    mu = model.mu_f * model.mu_b
    if model.fading_free:
        return 1.0 if x >= 1.0 else 0.0
    if model.rho == 1.0:
        return 1.0 - math.exp(-math.sqrt(mu * x))
    s = math.sqrt(x)
    hi = _tail_cut(model)
    if s >= hi:
        return 1.0 - fading_sf(x, model)
    bp = [s * 10.0**(-k) for k in range(1, 9)]
    res = integrate_adaptive(lambda t: _sqrt_weight(model, t), 0.0, s, _CDF_SPEC,
                             breakpoints=bp)
    return float(min(1.0, res.value.real))


def fading_sf(x, model):
    """P(h > x); computed from the tail so small survival probabilities
    keep relative accuracy."""
    x = float(x)
    if x <= 0:
        return 1.0
    mu = model.mu_f * model.mu_b
    if model.fading_free:
        return 0.0 if x >= 1.0 else 1.0
    if model.rho == 1.0:
        return math.exp(-math.sqrt(mu * x))
    s = math.sqrt(x)
    hi = _tail_cut(model)
    if s >= hi:
        return 0.0
    res = integrate_adaptive(lambda t: _sqrt_weight(model, t), s, hi, _CDF_SPEC)
    return float(max(0.0, res.value.real))


def fading_cf(c, model):
    """Characteristic function E[exp(i c h)] of the channel power.

    Closed form in the Faddeeva function at rho = 1 (h is then the
    square of one exponential variate); for rho < 1 the expectation is
    taken by conditioning on the forward-link power, whose conditional
    CF is the noncentral-exponential closed form, leaving a single
    smooth exponentially damped quadrature.  Vectorized over c.
    """
    arr = np.asarray(c, dtype=float)
    scalar = np.isscalar(c) or arr.ndim == 0
    arr = np.atleast_1d(arr)
    if model.fading_free:
        out = np.exp(1j * arr)
        return complex(out[0]) if scalar else out

    out = np.empty(arr.shape, dtype=complex)
    neg = arr < 0
    mag = np.abs(arr)
    zero = mag == 0
    out[zero] = 1.0

    work = mag[~zero]
    if work.size:
        if model.rho == 1.0:
            out[~zero] = _cf_rho1(work, model)
        else:
            out[~zero] = _cf_quad(work, model)
    out[neg] = np.conj(out[neg])
    return complex(out[0]) if scalar else out


def _cf_rho1(c, model):
    # h = kappa * x^2 with x ~ Exp(mu_f), kappa = mu_f / mu_b:
    # E -> mu_f * integral exp(-mu_f x + i c kappa x^2) dx
    #    = mu_f/2 * sqrt(pi/A) * exp(mu_f^2/(4A)) * erfc(mu_f/(2 sqrt(A)))
    # with A = -i c kappa (principal square root, Re sqrt(A) > 0).
    # exp(w^2) erfc(w) is the Faddeeva function wofz(i w): evaluating it
    # as one object avoids the huge cancelling phases of the two factors
    # when c is small.
    kappa = model.mu_f / model.mu_b
    root_a = np.sqrt(c * kappa) * np.exp(-0.25j * np.pi)
    w = 0.5 * model.mu_f / root_a
    return model.mu_f * 0.5 * np.sqrt(np.pi) / root_a * _sp.wofz(1j * w)


def _cf_quad(c, model):
    rho2 = model.rho**2
    v = (1.0 - rho2) / model.mu_b
    ncp = rho2 * model.mu_f / model.mu_b
    mu_f = model.mu_f
    col = c[None, :]

    def integrand(x):
        x = x[:, None]
        denom = 1.0 - 1j * col * v * x
        return mu_f * np.exp(-mu_f * x + 1j * col * ncp * x * x / denom) / denom

    hi = 45.0 / mu_f
    bp = [hi * 10.0**(-k) for k in range(1, 13)]
    spec = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-13, max_subdivisions=4000)
    res = integrate_adaptive(integrand, 0.0, hi, spec, breakpoints=bp)
    return np.asarray(res.value)


def sample_fading(model, rng, size=None):
    """Draw product channel powers h = |g_f|^2 |g_b|^2.

    The backscatter amplitude is built as
    g_b = rho (sigma_b / sigma_f) g_f + sqrt(1 - rho^2) w with w an
    independent circular Gaussian, which reproduces the product density
    family with amplitude correlation rho.  fading_free returns exactly
    1 without consuming random draws.
    """
    if model.fading_free:
        return 1.0 if size is None else np.ones(size)
    n = 1 if size is None else size
    sig_f = 1.0 / math.sqrt(model.mu_f)
    sig_b = 1.0 / math.sqrt(model.mu_b)
    g_f = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (sig_f / math.sqrt(2))
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (sig_b / math.sqrt(2))
    g_b = model.rho * (sig_b / sig_f) * g_f + math.sqrt(1.0 - model.rho**2) * w
    h = (np.abs(g_f)**2) * (np.abs(g_b)**2)
    return float(h[0]) if size is None else h


def typical_distance_pdf(annulus):
    """Constant planar density of a uniformly located sensor."""
    return 1.0 / annulus.area


def sample_typical_distance(annulus, rng, size=None):
    """Radial distance of a planar-uniform point: r = sqrt(z^2 + U (xi^2 - z^2))."""
    u = rng.random(size)
    return np.sqrt(annulus.zeta**2 + u * (annulus.xi**2 - annulus.zeta**2))


def nth_nearest_pdf(r, n, density, zeta):
    """Density of the distance to the n-th nearest PPP point outside the
    exclusion zone.

    The point count in the annulus [zeta, r] is Poisson with mean
    pi * density * (r^2 - zeta^2), giving

        f_r(r) = 2 pi density r * m(r)^{n-1} exp(-m(r)) / (n-1)!,
        m(r) = pi * density * (r^2 - zeta^2),

    which reduces to 2 (pi density)^n r^{2n-1} exp(-m) / (n-1)! when the
    exclusion zone is absent and coincides with it for n = 1.  Zero for
    r < zeta.  Evaluated in log space so large n cannot overflow.
    """
    if n < 1 or int(n) != n:
        raise ValueError("nth_nearest_pdf: n must be a positive integer")
    if not density > 0:
        raise ValueError("nth_nearest_pdf: density must be positive")
    arr = np.asarray(r, dtype=float)
    scalar = np.isscalar(r) or arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.zeros(arr.shape)
    ok = arr >= zeta
    rr = arr[ok]
    m = np.pi * density * (rr**2 - zeta**2)
    log_f = (math.log(2.0 * np.pi * density) + np.log(rr)
             - m - math.lgamma(n))
    if n > 1:
        with np.errstate(divide="ignore"):
            log_f = log_f + (n - 1) * np.log(m)
    out[ok] = np.exp(log_f)
    # m = 0 at r = zeta makes the n > 1 density vanish there
    if n > 1:
        out[ok] = np.where(m == 0, 0.0, out[ok])
    return float(out[0]) if scalar else out


def nth_nearest_mass(lo, hi, n, density, zeta):
    """Probability that the n-th nearest point lies in [lo, hi]."""
    if n < 1 or int(n) != n:
        raise ValueError("nth_nearest_mass: n must be a positive integer")

    def cum(r):
        if np.isinf(r):
            return 1.0
        if r <= zeta:
            return 0.0
        return float(_sp.gammainc(n, np.pi * density * (r**2 - zeta**2)))

    return max(0.0, cum(hi) - cum(lo))
