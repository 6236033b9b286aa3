"""Semi-analytical decoding probabilities via characteristic functions.

Every probability here is a Gil-Pelaez inversion

    P(I < x) = 1/2 - (1/pi) int_0^inf Im[ e^{-itx} phi_I(t) ] dt / t

of the interference characteristic function, averaged over the typical
sensor's channel power and distance.  The interference CF of a PPP with
density lamda and minimum interferer distance r over a reading annulus
[r, xi] has two equivalent evaluations:

* ``gamma`` form: the closed expression in upper incomplete gamma
  functions of imaginary argument, with the channel-power average taken
  by explicit quadrature against the product-Rayleigh density;
* ``direct`` form: the probability-generating-functional integral
  2 pi lam int (E_h[e^{i t h / u^{2 alpha}}] - 1) u du, where the inner
  expectation is the channel-power CF (closed form or a single smooth
  quadrature; see :func:`backscatter.channel.fading_cf`).

The two forms cross-check each other (and the complex-gamma branch
choices).  The production engine uses the gamma form in fading-free
mode, where it costs two gamma evaluations per abscissa, and the direct
form otherwise, where its integrand is smooth and non-oscillatory.

The outer semi-infinite t-integral is evaluated in stages: an adaptive
head resolving the small-t structure, half-period marching through the
persistent oscillation driven by the exclusion-zone edge (fading-free
integrands only; channel-power averaging removes persistent
oscillation), geometric panels through the smooth mid-range, and
half-period marching with Wynn extrapolation at the slowest surviving
frequency (the noise phase and the outer-edge phase).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .channel import (FadingModel, fading_cf, fading_sf, nth_nearest_mass,
                      nth_nearest_pdf, product_fading_pdf)
from .numerics import (ConvergenceError, QuadratureSpec, integrate_adaptive,
                       integrate_semi_infinite, principal_power, upper_gamma,
                       _wynn_epsilon)

__all__ = [
    "AnalyticResult",
    "AnalysisError",
    "interference_cf",
    "chi",
    "decoding_probability",
    "decoding_probability_high_power",
    "noise_limited_probability",
    "cancel_probability",
    "decode_after_cancel",
    "sic_decoding_probability",
    "cdf_from_cf",
]

# Debug hook: the sign of the imaginary unit entering the gamma-form
# arguments.  Flipping it corrupts the branch pairing between the
# power prefactor and the gamma arguments, which the validation command
# must detect (regression canary); never change it in production code.
_branch_sign = 1.0


class AnalysisError(RuntimeError):
    """A probability evaluation produced a numerically unsound value."""


@dataclass
class AnalyticResult:
    """Probability value with quadrature diagnostics.

    value is clamped to [0, 1]; raw_value records the unclamped number
    so clamping is never silent.
    """

    value: float
    quad_error: float
    truncated_at: float
    evaluations: int
    raw_value: float


_PROB_SPEC = QuadratureSpec(rel_tol=1e-9, abs_tol=2e-6,
                            max_subdivisions=3000, truncation_threshold=1e-10)
_OP_SPEC = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-12, max_subdivisions=4000)


# ----------------------------------------------------------------------
# Channel-power CF table (engine fast path)
# ----------------------------------------------------------------------

class _CfTable:
    """Cubic-spline table of the channel-power CF on a log grid.

    Exact closed/quadrature evaluations feed a spline over 29 decades;
    below the grid the CF is 1 + i c E[h] to machine precision, above it
    the exact routine is called directly (rare).
    """

    LO, HI = 1e-14, 1e15

    def __init__(self, model):
        self.model = model
        if model.rho == 1.0 or model.fading_free:
            self.spline = None
        else:
            n_dec = int(round(math.log10(self.HI / self.LO)))
            grid = np.exp(np.linspace(math.log(self.LO), math.log(self.HI),
                                      40 * n_dec + 1))
            self.spline = CubicSpline(np.log(grid), fading_cf(grid, model))
        self.mean = model.mean_power

    def __call__(self, c):
        """CF at non-negative arguments c (any array shape)."""
        c = np.asarray(c, dtype=float)
        if self.model.fading_free:
            return np.exp(1j * c)
        if self.model.rho == 1.0:
            return fading_cf(c, self.model)
        out = np.empty(c.shape, dtype=complex)
        tiny = c < self.LO
        huge = c > self.HI
        mid = ~(tiny | huge)
        out[tiny] = 1.0 + 1j * c[tiny] * self.mean
        if huge.any():
            out[huge] = fading_cf(c[huge], self.model)
        out[mid] = self.spline(np.log(c[mid]))
        return out


_CF_TABLES = {}


def _cf_table(model):
    if model not in _CF_TABLES:
        if len(_CF_TABLES) > 8:
            _CF_TABLES.clear()
        _CF_TABLES[model] = _CfTable(model)
    return _CF_TABLES[model]


# ----------------------------------------------------------------------
# Kernels: direct-link transform and interference CF exponent
# ----------------------------------------------------------------------

def _u_breakpoints(lo, hi, n=10):
    return list(lo * (hi / lo) ** (np.arange(1, n) / n))


def _x_direct(t, params, phi):
    """X(t) = int_zeta^xi 2 u E_h[exp(-i t h / (u^{2a} tau))] du.

    This equals (1/alpha)(i t / tau)^{1/alpha} chi(t); the decoding
    integrand uses X directly so no branch powers are needed on the
    smooth path.  Vectorized over t.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ze, xi = params.zeta, params.xi
    two_a = 2.0 * params.alpha
    tau = params.tau_linear

    def integrand(u):
        c = np.outer(u ** (-two_a), t) / tau
        return 2.0 * u[:, None] * np.conj(phi(c))

    res = integrate_adaptive(integrand, ze, xi,
                             QuadratureSpec(rel_tol=1e-9, abs_tol=1e-10 * (xi**2 - ze**2),
                                            max_subdivisions=2000),
                             breakpoints=_u_breakpoints(ze, xi))
    return np.asarray(res.value)


def _x_ff_gamma(t, params):
    """Fading-free X(t) in closed gamma form."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    al = params.alpha
    tau = params.tau_linear
    a = -1.0 / al
    s = _branch_sign
    z_xi = s * 1j * t / (tau * params.xi ** (2 * al))
    z_ze = s * 1j * t / (tau * params.zeta ** (2 * al))
    pref = principal_power(s * 1j / tau, 1.0 / al) * t ** (1.0 / al) / al
    return pref * (upper_gamma(a, z_xi) - upper_gamma(a, z_ze))


def _exponent_direct(t, density, r_min, params, phi):
    """log phi_I via the PGFL: 2 pi lam int_{r}^{xi} (phi_h(t u^{-2a}) - 1) u du."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xi = params.xi
    two_a = 2.0 * params.alpha

    def integrand(u):
        c = np.outer(u ** (-two_a), t)
        return (phi(c) - 1.0) * u[:, None]

    res = integrate_adaptive(integrand, r_min, xi,
                             QuadratureSpec(rel_tol=1e-9, abs_tol=1e-11 * (xi**2 - r_min**2 + 1.0),
                                            max_subdivisions=2000),
                             breakpoints=_u_breakpoints(r_min, xi))
    return 2.0 * np.pi * density * np.asarray(res.value)


def _exponent_ff_gamma(t, density, r_min, params):
    """log phi_I in the fading-free closed gamma form."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    al = params.alpha
    a = -1.0 / al
    s = _branch_sign
    z_xi = -s * 1j * t / params.xi ** (2 * al)
    z_rm = -s * 1j * t / r_min ** (2 * al)
    phi_term = (principal_power(-s * 1j, 1.0 / al) * t ** (1.0 / al) / al
                * (upper_gamma(a, z_xi) - upper_gamma(a, z_rm)))
    return np.pi * density * (r_min**2 - params.xi**2 + phi_term)


def _exponent_ff_gamma_grid(t, density, r_grid, params):
    """log phi_I on an (r, t) grid, fading-free (SIC averages)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.asarray(r_grid, dtype=float)
    al = params.alpha
    a = -1.0 / al
    s = _branch_sign
    z_xi = -s * 1j * t / params.xi ** (2 * al)           # (nt,)
    z_r = -s * 1j * np.outer(r ** (-2 * al), t)          # (nr, nt)
    g_xi = upper_gamma(a, z_xi)
    g_r = upper_gamma(a, z_r)
    phi_term = (principal_power(-s * 1j, 1.0 / al) * t ** (1.0 / al) / al
                * (g_xi[None, :] - g_r))
    return np.pi * density * ((r**2 - params.xi**2)[:, None] + phi_term)


# ----------------------------------------------------------------------
# Staged Gil-Pelaez driver
# ----------------------------------------------------------------------

def _im_over_t_integral(w_fn, *, fast_period, slow_period, oscillatory, spec,
                        allow_fast_exit=False):
    """int_0^inf Im[W(t)] / t dt for a CF-product kernel W.

    fast_period: shortest structural scale of W (exclusion-zone edge
    plus noise phase); slow_period: slowest persistent oscillation
    (outer edge and noise phase), or None when the tail decays without
    persistent oscillation beyond the fast scale.  ``oscillatory``
    selects the fading-free treatment (persistent edge oscillation).
    allow_fast_exit permits Wynn extrapolation to finish the integral
    during the fast-oscillation stage even when a slow period exists;
    callers assert this when the interference CF decays to a negligible
    level before slow structure can activate.
    Returns (value, error, truncated_at, evaluations).
    """
    budget = spec.abs_tol
    rel = spec.rel_tol
    evals = [0]

    def g(t):
        t = np.asarray(t, dtype=float)
        evals[0] += t.size
        return np.imag(w_fn(t)) / t

    fp = float(fast_period)
    ta = 12.0 * fp
    seeds = [ta * 10.0 ** (-k) for k in range(1, 10)]
    seeds += list(0.5 * fp * np.arange(1, 24))
    res = integrate_adaptive(g, 0.0, ta,
                             QuadratureSpec(rel, 0.2 * budget, spec.max_subdivisions,
                                            spec.truncation_threshold),
                             breakpoints=seeds)
    total = res.value.real
    err = res.error_estimate
    t_cur = ta

    def done(value, error):
        return float(value), float(error), t_cur, evals[0]

    # Stage B: half-period marching through the persistent fast oscillation
    if oscillatory:
        fast_exit = allow_fast_exit or slow_period is None
        pspec = QuadratureSpec(rel, max(2e-4 * budget, 1e-300), spec.max_subdivisions)
        partials, ext_prev, streak, dead = [], None, 0, 0
        last = np.inf
        for _ in range(600):
            if slow_period is not None and t_cur >= 0.15 * slow_period:
                break
            r = integrate_adaptive(g, t_cur, t_cur + 0.5 * fp, pspec)
            total += r.value.real
            err += r.error_estimate
            t_cur += 0.5 * fp
            partials.append(total)
            last = abs(r.value.real)
            dead = dead + 1 if last < 0.02 * budget else 0
            if dead >= 4:
                break
            if fast_exit and len(partials) >= 10:
                ext = _wynn_epsilon(partials[-24:])
                delta = abs(ext - ext_prev) if ext_prev is not None else np.inf
                ext_prev = ext
                streak = streak + 1 if delta <= 0.05 * budget else 0
                if streak >= 2 and np.isfinite(ext):
                    return done(ext, err + 3 * delta)
        if np.isfinite(last):
            err += last

    # Stage C: geometric panels through the smooth mid-range
    pspec = QuadratureSpec(rel, max(1e-3 * budget, 1e-300), spec.max_subdivisions)
    width = max(0.4 * t_cur, fp)
    hist = []
    for _ in range(200):
        if slow_period is not None and t_cur >= 0.15 * slow_period:
            break
        r = integrate_adaptive(g, t_cur, t_cur + width, pspec)
        total += r.value.real
        err += r.error_estimate
        t_cur += width
        width *= 1.5
        hist.append(r.value.real)
        if len(hist) >= 3:
            p0, p1, p2 = abs(hist[-1]), abs(hist[-2]), abs(hist[-3])
            if p0 < 0.01 * budget and p1 < 0.01 * budget:
                return done(total, err + p0 + p1)
            q1 = p0 / p1 if p1 > 0 else 1.0
            q2 = p1 / p2 if p2 > 0 else 1.0
            regular = (np.sign(hist[-1]) == np.sign(hist[-2]) == np.sign(hist[-3])
                       and 0 < q1 < 0.9 and 0 < q2 < 0.9
                       and abs(q1 - q2) < 0.3 * max(q1, q2))
            if regular:
                rem = p0 * q1 / (1.0 - q1)
                if rem <= 0.25 * budget:
                    return done(total, err + 1.5 * rem)
    else:
        if slow_period is None:
            raise ConvergenceError(
                "gil-pelaez: smooth tail did not converge",
                done(total, err + abs(hist[-1]) if hist else err))

    # Stage D: half-period marching at the slowest persistent frequency
    half = 0.5 * slow_period
    partials, ext_prev, streak = [total], None, 0
    pspec = QuadratureSpec(rel, max(1e-3 * budget, 1e-300), spec.max_subdivisions)
    last = np.inf
    for k in range(240):
        r = integrate_adaptive(g, t_cur, t_cur + half, pspec)
        total += r.value.real
        err += r.error_estimate
        t_cur += half
        partials.append(total)
        last = abs(r.value.real)
        if last < 0.01 * budget and k >= 2:
            return done(total, err + 2 * last)
        if k >= 6:
            ext = _wynn_epsilon(partials[-24:])
            delta = abs(ext - ext_prev) if ext_prev is not None else np.inf
            ext_prev = ext
            streak = streak + 1 if delta <= 0.05 * budget else 0
            if streak >= 2 and np.isfinite(ext):
                return done(ext, err + 3 * delta)
    raise ConvergenceError("gil-pelaez: slow-oscillation tail did not converge",
                           done(total, err + last))


def cdf_from_cf(phi, x, *, spec=None, oscillation_period=None, slow_period=None):
    """CDF value F(x) from a characteristic function via Gil-Pelaez.

    phi must map an ndarray of t > 0 to CF values.  Used for self-tests
    and as the generic inversion entry point.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-8 * math.pi,
                                  max_subdivisions=4000)
    x = float(x)
    period = oscillation_period or (2.0 * math.pi / max(abs(x), 1e-6))

    def w(t):
        return np.exp(-1j * t * x) * np.asarray(phi(t))

    val, err, t_end, evals = _im_over_t_integral(
        w, fast_period=period, slow_period=slow_period,
        oscillatory=True, spec=spec)
    return 0.5 - val / math.pi


# ----------------------------------------------------------------------
# Lemma-level operations (both evaluation modes)
# ----------------------------------------------------------------------

def _fading_for(params, fading):
    return fading if fading is not None else params.fading_model()


def _h_weight(model, s):
    """2 s f_h(s^2), guarding the fading-free point mass."""
    return 2.0 * s * product_fading_pdf(s * s, model)


def _theta_integral(G, theta_head, period, spec=None):
    """Head-plus-marching evaluation of int_0^inf G(theta) dtheta.

    G has an integrable singularity at 0, an oscillatory stretch with
    the given period whose envelope decays algebraically, and a smooth
    slowly-decaying remainder (the channel-power weight).  Geometric
    panels traverse both regimes; the embedded-rule refinement resolves
    the oscillation wherever it still matters.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-11, max_subdivisions=6000)
    seeds = [theta_head * 10.0 ** (-k) for k in range(1, 11)]
    head = integrate_adaptive(G, 0.0, theta_head, spec, breakpoints=seeds)
    tail = integrate_semi_infinite(G, theta_head, spec,
                                   initial_width=max(theta_head, period),
                                   growth=1.4, max_panels=400)
    value = head.value + tail.value
    err = head.error_estimate + tail.error_estimate
    return value, err, head.evaluations + tail.evaluations, tail.truncated_at


def interference_cf(t, density, r_min, params, fading=None, mode="auto"):
    """Characteristic function phi_I(t) of the aggregate interference
    from a PPP of the given density with nearest interferer at r_min.

    mode "gamma" evaluates the closed-form exponent (gamma bracket, with
    the channel-power integral taken explicitly in fading mode); mode
    "direct" evaluates the pre-transform PGFL distance integral against
    the channel-power CF.  "auto" picks gamma when fading-free, direct
    otherwise.  The two agree to the quadrature tolerance and serve as
    mutual cross-checks of the branch conventions.
    """
    t = float(t)
    if t <= 0:
        raise ValueError("interference_cf: t must be positive")
    if density < 0:
        raise ValueError("interference_cf: density must be non-negative")
    if not (params.zeta <= r_min < params.xi):
        raise ValueError("interference_cf: r_min must lie in [zeta, xi)")
    if density == 0.0:
        return 1.0 + 0.0j
    model = _fading_for(params, fading)
    if mode == "auto":
        mode = "gamma" if model.fading_free else "direct"

    if mode == "direct":
        phi = (lambda c: np.exp(1j * c)) if model.fading_free else (lambda c: fading_cf(c, model))
        expo = _exponent_direct(t, density, r_min, params, phi)[0]
        return complex(np.exp(expo))
    if mode != "gamma":
        raise ValueError(f"interference_cf: unknown mode {mode!r}")
    if model.fading_free:
        return complex(np.exp(_exponent_ff_gamma(t, density, r_min, params)[0]))

    al = params.alpha
    a = -1.0 / al
    s = _branch_sign
    b_xi = 1.0 / params.xi ** (2 * al)
    b_rm = 1.0 / r_min ** (2 * al)
    pref = principal_power(-s * 1j, 1.0 / al) / al

    def G(theta):
        h = theta / t
        w = product_fading_pdf(h, model) / t
        br = upper_gamma(a, -s * 1j * theta * b_xi) - upper_gamma(a, -s * 1j * theta * b_rm)
        return pref * theta ** (1.0 / al) * br * w

    theta_head = 0.25 * math.pi / b_rm
    value, _err, _ev, _T = _theta_integral(G, theta_head, 2.0 * math.pi / b_rm)
    expo = math.pi * density * (r_min**2 - params.xi**2 + value)
    return complex(np.exp(expo))


def chi(t, params, fading=None, mode="auto"):
    """The direct-link transform chi(t) of the decoding-probability
    theorem: the channel-power average of the gamma bracket at the SINR
    threshold.

    mode "gamma" integrates the bracket against the power density
    directly; mode "direct" recovers chi from the distance-average
    X(t) = (1/alpha)(i t / tau)^{1/alpha} chi(t) computed with the
    channel-power CF.  "auto" picks gamma when fading-free, direct
    otherwise.
    """
    t = float(t)
    if t <= 0:
        raise ValueError("chi: t must be positive")
    model = _fading_for(params, fading)
    al = params.alpha
    tau = params.tau_linear
    a = -1.0 / al
    if mode == "auto":
        mode = "gamma" if model.fading_free else "direct"

    if mode == "direct":
        phi = (lambda c: np.exp(1j * c)) if model.fading_free else (lambda c: fading_cf(c, model))
        x_val = _x_direct(t, params, phi)[0]
        return complex(al * principal_power(1j * t / tau, -1.0 / al) * x_val)
    if mode != "gamma":
        raise ValueError(f"chi: unknown mode {mode!r}")

    s = _branch_sign
    c_xi = 1.0 / (tau * params.xi ** (2 * al))
    c_ze = 1.0 / (tau * params.zeta ** (2 * al))
    if model.fading_free:
        return complex(upper_gamma(a, s * 1j * t * c_xi) - upper_gamma(a, s * 1j * t * c_ze))

    def G(theta):
        h = theta / t
        w = product_fading_pdf(h, model) / t
        br = upper_gamma(a, s * 1j * theta * c_xi) - upper_gamma(a, s * 1j * theta * c_ze)
        return h ** (1.0 / al) * br * w

    theta_head = 0.25 * math.pi / c_ze
    value, _err, _ev, _T = _theta_integral(G, theta_head, 2.0 * math.pi / c_ze)
    return complex(value)


# ----------------------------------------------------------------------
# Decoding probabilities
# ----------------------------------------------------------------------

def _sanitize(raw, err, t_end, evals, *, check=True):
    if check and not (-0.01 <= raw <= 1.01):
        raise AnalysisError(
            f"probability {raw:.6f} outside [-0.01, 1.01]; quadrature error {err:.2e}")
    return AnalyticResult(value=float(min(1.0, max(0.0, raw))),
                          quad_error=float(err), truncated_at=float(t_end),
                          evaluations=int(evals), raw_value=float(raw))


def _thm1_kernel(params, fading, *, high_power, force_direct=False):
    """W(t) = nu(t) X(t) phi_I(t, lambda', zeta) and its staging scales."""
    model = fading
    ns = 0.0 if high_power else params.noise_to_signal
    lam_thin = params.thinned_density
    ze = params.zeta
    tau = params.tau_linear
    two_a = 2.0 * params.alpha
    use_gamma = model.fading_free and not force_direct

    if use_gamma:
        def w(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            x = _x_ff_gamma(t, params)
            if lam_thin > 0:
                x = x * np.exp(_exponent_ff_gamma(t, lam_thin, ze, params))
            return np.exp(1j * ns * t) * x
    else:
        phi = _cf_table(model)

        def w(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            x = _x_direct(t, params, phi)
            if lam_thin > 0:
                x = x * np.exp(_exponent_direct(t, lam_thin, ze, params, phi))
            return np.exp(1j * ns * t) * x

    fast = 2.0 * math.pi / (1.0 / (tau * ze ** two_a) + ns + 1e-300)
    slow_rate = ns + 1.0 / (tau * params.xi ** two_a) if model.fading_free else ns
    slow = 2.0 * math.pi / slow_rate if slow_rate > 0 else None
    return w, fast, slow, model.fading_free


def _decoding_probability(params, fading=None, *, spec=None, high_power=False,
                          force_direct=False):
    if not params.tau_linear > 0:
        raise ValueError("decoding_probability: requires tau_linear > 0")
    model = _fading_for(params, fading)
    spec = spec or _PROB_SPEC
    w, fast, slow, osc = _thm1_kernel(params, model, high_power=high_power,
                                      force_direct=force_direct)
    area_pi = math.pi * (params.xi**2 - params.zeta**2)
    gp_spec = QuadratureSpec(spec.rel_tol, spec.abs_tol * area_pi,
                             spec.max_subdivisions, spec.truncation_threshold)
    val, err, t_end, evals = _im_over_t_integral(
        w, fast_period=fast, slow_period=slow, oscillatory=osc, spec=gp_spec,
        allow_fast_exit=_atom_negligible(params))
    raw = 0.5 - val / area_pi
    return _sanitize(raw, err / area_pi, t_end, evals)


def decoding_probability(params, fading=None, *, spec=None, _force_direct=False):
    """Probability of decoding the typical sensor, SDMA + FDMA scenario.

    Gil-Pelaez inversion of the interference CF at the thinned density
    lambda' = p_c lambda / D, averaged over the typical link.  Raises
    AnalysisError if the raw inverted value leaves [-0.01, 1.01].
    """
    return _decoding_probability(params, fading, spec=spec,
                                 force_direct=_force_direct)


def decoding_probability_high_power(params, fading=None, *, spec=None):
    """Transmit-power upper bound of the decoding probability (nu = 1)."""
    return _decoding_probability(params, fading, spec=spec, high_power=True)


def noise_limited_probability(params, fading=None, *, spec=None):
    """Decoding probability with the interference removed (I -> 0).

    Closed gamma form for the fully correlated channel; numeric
    survival-function average over the annulus otherwise ("the
    closed-form expression for partial correlation does not fit here",
    so it is integrated numerically).  Fading-free reduces to the area
    fraction within the noise-limited reading range.
    """
    model = _fading_for(params, fading)
    spec = spec or _PROB_SPEC
    al = params.alpha
    ze, xi = params.zeta, params.xi
    ns = params.noise_to_signal
    area2 = xi**2 - ze**2

    if ns == 0.0:
        return AnalyticResult(1.0, 0.0, 0.0, 0, 1.0)

    if model.fading_free:
        # h = 1: decode iff d < (1 / (tau ns))^{1/(2 alpha)}
        r_star = (1.0 / (params.tau_linear * ns)) ** (1.0 / (2 * al))
        r_star = min(max(r_star, ze), xi)
        raw = (r_star**2 - ze**2) / area2
        return _sanitize(raw, 0.0, 0.0, 0)

    if model.rho == 1.0:
        c = math.sqrt(model.mu_f * model.mu_b * params.tau_linear * ns)
        a2 = 2.0 / al
        g = (upper_gamma(a2, ze**al * c) - upper_gamma(a2, xi**al * c)).real
        raw = 2.0 * c ** (-a2) * g / (al * area2)
        return _sanitize(raw, 1e-13, 0.0, 2)

    evals = [0]

    def integrand(d):
        evals[0] += d.size
        return np.array([fading_sf(params.tau_linear * dd ** (2 * al) * ns, model) * dd
                         for dd in d])

    res = integrate_adaptive(integrand, ze, xi,
                             QuadratureSpec(1e-9, 1e-10, 2000),
                             breakpoints=_u_breakpoints(ze, xi))
    raw = 2.0 * res.value.real / area2
    return _sanitize(raw, res.error_estimate / area2, 0.0, evals[0])


# ----------------------------------------------------------------------
# SIC quantities (fading-free)
# ----------------------------------------------------------------------

def _atom_negligible(params):
    """True when the probability of an interference-free realization is
    far below the quadrature budget, i.e. the interference CF decays to
    nothing and no slow-scale tail structure can survive."""
    return math.pi * params.thinned_density * (params.xi**2 - params.zeta**2) > 27.6


def _require_fading_free(model, opname):
    if not model.fading_free:
        raise ValueError(f"{opname}: defined for the fading-free mode only")


_GL12_X, _GL12_W = np.polynomial.legendre.leggauss(12)


def _r_quadrature(params, density, n, panels=8):
    """Composite Gauss-Legendre nodes/weights covering the n-th nearest
    distance mass inside the reading range."""
    ze, xi = params.zeta, params.xi
    r_hi = math.sqrt(ze**2 + (n + 36.0) / (math.pi * density))
    r_hi = min(r_hi, xi)
    edges = np.linspace(ze, r_hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * _GL12_X[None, :]).ravel()
    weights = (half[:, None] * _GL12_W[None, :]).ravel()
    return nodes, weights


def _psi_average(n, params):
    """psi(t) = E_r[phi_I(t, lambda', r)] over the in-range mass of the
    n-th nearest distance (smooth in r at every t: fixed grid)."""
    lam_thin = params.thinned_density
    nodes, weights = _r_quadrature(params, lam_thin, n)
    f_vals = nth_nearest_pdf(nodes, n, lam_thin, params.zeta)
    wf = (weights * f_vals)[:, None]

    def psi(t):
        expo = _exponent_ff_gamma_grid(t, lam_thin, nodes, params)
        return (np.exp(expo) * wf).sum(axis=0)

    return psi


def _omega_cancel_printed(n, params):
    """f_r-average of exp(-i t/(r^{2a} tau)) phi_I(t, lambda', r), used
    only by the verbatim-normalization variant."""
    lam_thin = params.thinned_density
    tau = params.tau_linear
    two_a = 2.0 * params.alpha
    nodes, weights = _r_quadrature(params, lam_thin, n, panels=16)
    f_vals = nth_nearest_pdf(nodes, n, lam_thin, params.zeta)
    wf = (weights * f_vals)[:, None]

    def omega(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        expo = _exponent_ff_gamma_grid(t, lam_thin, nodes, params)
        phase = np.exp(-1j * np.outer(nodes ** (-two_a), t) / tau)
        return (np.exp(expo) * phase * wf).sum(axis=0)

    return omega


def cancel_probability(n, params, *, spec=None, printed_eq9=False):
    """Probability of decoding the n-th closest sensor (SIC stage n).

    Fading-free.  Derived from first principles: the Gil-Pelaez CDF of
    the interference beyond the n-th sensor, averaged over its distance
    (including the mass where fewer than n interferers exist inside the
    reading range, which decodes on the noise budget alone).

    printed_eq9 evaluates the expression with the literature prefactor
    1/(2 alpha pi) and the (i t / tau)^{1/alpha} factor instead, kept
    for comparison; Monte Carlo arbitrates between the two.
    """
    if n < 1 or int(n) != n:
        raise ValueError("cancel_probability: n must be a positive integer")
    model = params.fading_model()
    _require_fading_free(model, "cancel_probability")
    spec = spec or _PROB_SPEC
    lam_thin = params.thinned_density
    ze, xi = params.zeta, params.xi
    tau = params.tau_linear
    al = params.alpha
    two_a = 2.0 * al
    ns = params.noise_to_signal

    if lam_thin <= 0:
        # degenerate: no interferers ever exist; the limiting cancel
        # probability is 1 without noise (any distance decodes) and 0
        # with noise (the would-be n-th sensor sits beyond the range)
        v = 1.0 if ns == 0.0 else 0.0
        return AnalyticResult(v, 0.0, 0.0, 0, v)

    # n-th sensor beyond xi: no interference inside the range; decoding
    # succeeds on the noise budget alone out to r*
    if ns == 0.0:
        tail = nth_nearest_mass(xi, np.inf, n, lam_thin, ze)
    else:
        r_star = (1.0 / (tau * ns)) ** (1.0 / two_a)
        tail = nth_nearest_mass(xi, max(xi, r_star), n, lam_thin, ze)

    if printed_eq9:
        omega = _omega_cancel_printed(n, params)
        pref = 1.0 / al

        def w(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            p = principal_power(1j / tau, pref) * t ** pref
            return p * np.exp(1j * ns * t) * omega(t)

        fast = 2.0 * math.pi / (1.0 / (tau * ze ** two_a) + ns + 1e-300)
        slow = 2.0 * math.pi / (ns + 1.0 / xi ** two_a)
        gp_spec = QuadratureSpec(spec.rel_tol, spec.abs_tol * 2 * al * math.pi,
                                 spec.max_subdivisions, spec.truncation_threshold)
        val, err, t_end, evals = _im_over_t_integral(
            w, fast_period=fast, slow_period=slow, oscillatory=True, spec=gp_spec,
            allow_fast_exit=_atom_negligible(params))
        raw = 0.5 - val / (2.0 * al * math.pi)
        return _sanitize(raw, err / (2 * al * math.pi), t_end, evals, check=False)

    # Average the Gil-Pelaez CDF of the interference beyond r over the
    # n-th nearest distance: one clean single-tone inversion per node.
    nodes, weights = _r_quadrature(params, lam_thin, n)
    f_vals = nth_nearest_pdf(nodes, n, lam_thin, ze)
    gp_spec = QuadratureSpec(spec.rel_tol, spec.abs_tol * math.pi,
                             spec.max_subdivisions, spec.truncation_threshold)
    fast_exit = _atom_negligible(params)
    slow = 2.0 * math.pi / (ns + 1.0 / xi ** two_a)
    total = tail
    err = 0.0
    evals = 0
    t_end = 0.0
    for r_j, w_j, f_j in zip(nodes, weights, f_vals):
        if w_j * f_j < 1e-13:
            continue
        x_j = 1.0 / (r_j ** two_a * tau) - ns
        if x_j <= 0:
            continue  # interference is non-negative: F(x <= 0) = 0

        def w_kernel(t, r_j=r_j, x_j=x_j):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return np.exp(-1j * x_j * t
                          + _exponent_ff_gamma(t, lam_thin, r_j, params))

        fast = 2.0 * math.pi / (x_j + 1.0 / r_j ** two_a + ns)
        val, e_j, t_j, n_j = _im_over_t_integral(
            w_kernel, fast_period=fast, slow_period=slow, oscillatory=True,
            spec=gp_spec, allow_fast_exit=fast_exit)
        total += w_j * f_j * (0.5 - val / math.pi)
        err += w_j * f_j * e_j / math.pi
        evals += n_j
        t_end = max(t_end, t_j)
    return _sanitize(total, err, t_end, evals)


def decode_after_cancel(n, params, *, spec=None, printed_eq9=False):
    """Decoding probability of the typical sensor once the n nearest
    interferers have been removed.

    Structurally the main theorem with phi_I(t, lambda', zeta) replaced
    by the f_r-average of phi_I(t, lambda', r); the mass of f_r beyond
    the reading range contributes an interference-free unit CF.
    Fading-free.  printed_eq9 keeps the literature normalization for
    comparison.
    """
    if n < 1 or int(n) != n:
        raise ValueError("decode_after_cancel: n must be a positive integer")
    model = params.fading_model()
    _require_fading_free(model, "decode_after_cancel")
    spec = spec or _PROB_SPEC
    lam_thin = params.thinned_density
    ze, xi = params.zeta, params.xi
    tau = params.tau_linear
    al = params.alpha
    two_a = 2.0 * al
    ns = params.noise_to_signal
    area_pi = math.pi * (xi**2 - ze**2)

    if lam_thin <= 0:
        return noise_limited_probability(params, model, spec=spec)

    mass_out = nth_nearest_mass(xi, np.inf, n, lam_thin, ze)
    psi = _psi_average(n, params)
    fast = 2.0 * math.pi / (1.0 / (tau * ze ** two_a) + ns + 1e-300)
    slow = 2.0 * math.pi / (ns + 1.0 / (tau * xi ** two_a))
    fast_exit = _atom_negligible(params)

    if printed_eq9:
        def w(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            chi_ff = (upper_gamma(-1.0 / al, 1j * t / (tau * xi ** two_a))
                      - upper_gamma(-1.0 / al, 1j * t / (tau * ze ** two_a)))
            p = principal_power(1j / tau, 1.0 / al) * t ** (1.0 / al)
            return p * np.exp(1j * ns * t) * chi_ff * psi(t)

        gp_spec = QuadratureSpec(spec.rel_tol, spec.abs_tol * 2 * al * math.pi,
                                 spec.max_subdivisions, spec.truncation_threshold)
        val, err, t_end, evals = _im_over_t_integral(
            w, fast_period=fast, slow_period=slow, oscillatory=True, spec=gp_spec,
            allow_fast_exit=fast_exit)
        raw = 0.5 - val / (2.0 * al * math.pi)
        return _sanitize(raw, err / (2 * al * math.pi), t_end, evals, check=False)

    def w(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(1j * ns * t) * _x_ff_gamma(t, params) * (psi(t) + mass_out)

    gp_spec = QuadratureSpec(spec.rel_tol, spec.abs_tol * area_pi,
                             spec.max_subdivisions, spec.truncation_threshold)
    val, err, t_end, evals = _im_over_t_integral(
        w, fast_period=fast, slow_period=slow, oscillatory=True, spec=gp_spec,
        allow_fast_exit=fast_exit)
    raw = 0.5 - val / area_pi
    return _sanitize(raw, err / area_pi, t_end, evals)


def sic_decoding_probability(params, *, spec=None, printed_eq9=False):
    """Decoding probability with up to n_sic cancellation rounds.

    Composes the per-stage cancel and decode probabilities under the
    independence approximation:

        Pi = Pi_d + sum_i [prod_{j<i} (1 - Pd_j)] [prod_{j<=i} Pc_j] Pd_i

    with Pd_0 = Pi_d (fading-free).  n_sic = 0 returns Pi_d exactly.
    """
    model = params.fading_model()
    _require_fading_free(model, "sic_decoding_probability")
    n = int(params.n_sic)
    base = decoding_probability(params, model, spec=spec)
    if n == 0:
        return base
    p_d = [base.value]
    p_c = []
    err = base.quad_error
    evals = base.evaluations
    t_end = base.truncated_at
    for i in range(1, n + 1):
        rc = cancel_probability(i, params, spec=spec, printed_eq9=printed_eq9)
        rd = decode_after_cancel(i, params, spec=spec, printed_eq9=printed_eq9)
        p_c.append(rc.value)
        p_d.append(rd.value)
        err += rc.quad_error + rd.quad_error
        evals += rc.evaluations + rd.evaluations
        t_end = max(t_end, rc.truncated_at, rd.truncated_at)
    total = base.value
    for i in range(1, n + 1):
        fail = np.prod([1.0 - p_d[j] for j in range(i)])
        canc = np.prod(p_c[:i])
        total += fail * canc * p_d[i]
    return _sanitize(float(total), err, t_end, evals)
