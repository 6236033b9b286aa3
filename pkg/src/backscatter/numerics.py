"""Special functions and quadrature primitives.

Everything downstream (characteristic functions, Gil-Pelaez inversion,
closed-form probabilities) is built on four ingredients: modified Bessel
functions I0/K0, the upper incomplete gamma function on the principal
branch for complex arguments, principal-branch complex powers, and two
adaptive quadrature drivers (finite interval and semi-infinite with
oscillatory-tail acceleration).

I0/K0 are delegated to scipy's cephes implementations; the incomplete
gamma is implemented here because scipy does not support negative order
or complex argument.  All functions are pure and reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as _sp

__all__ = [
    "QuadratureSpec",
    "QuadratureResult",
    "ConvergenceError",
    "bessel_i0",
    "bessel_k0",
    "upper_gamma",
    "principal_power",
    "integrate_adaptive",
    "integrate_semi_infinite",
]

_FPMIN = 1e-300


class ConvergenceError(RuntimeError):
    """Quadrature or series failed to converge within its budget.

    Carries the best available estimate in ``result`` so callers can
    inspect how far off the computation was.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and budgets shared by the quadrature drivers.

    truncation_threshold is the envelope magnitude (panel integral per
    unit width) below which a semi-infinite tail may be dropped.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000
    truncation_threshold: float = 1e-12

    def __post_init__(self):
        if not (self.rel_tol > 0 and np.isfinite(self.rel_tol)):
            raise ValueError("rel_tol must be positive and finite")
        if not (self.abs_tol > 0 and np.isfinite(self.abs_tol)):
            raise ValueError("abs_tol must be positive and finite")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not (self.truncation_threshold > 0):
            raise ValueError("truncation_threshold must be positive")


@dataclass
class QuadratureResult:
    value: complex
    error_estimate: float
    evaluations: int
    truncated_at: float

    def __post_init__(self):
        if self.error_estimate < 0:
            raise ValueError("error_estimate must be non-negative")


# ----------------------------------------------------------------------
# Special functions
# ----------------------------------------------------------------------

def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero.

    Requires x >= 0 and finite; raises ValueError otherwise.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_i0: input must be finite")
    if np.any(arr < 0):
        raise ValueError("bessel_i0: input must be non-negative")
    out = _sp.i0(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def bessel_k0(x):
    """Modified Bessel function of the second kind, order zero.

    Requires x > 0 (K0 diverges logarithmically at the origin).
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_k0: input must be finite")
    if np.any(arr <= 0):
        raise ValueError("bessel_k0: input must be strictly positive")
    out = _sp.k0(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def principal_power(z, p):
    """z**p on the principal branch, arg z in (-pi, pi].

    z = 0 returns 0 for p > 0 and raises for p <= 0.  Accepts scalars or
    arrays of z; p is a real scalar.
    """
    p = float(p)
    if not np.isfinite(p):
        raise ValueError("principal_power: exponent must be finite")
    arr = np.asarray(z, dtype=complex)
    scalar = np.isscalar(z) or arr.ndim == 0
    if not np.all(np.isfinite(arr)):
        raise ValueError("principal_power: base must be finite")
    zero = arr == 0
    if np.any(zero) and p <= 0:
        raise ValueError("principal_power: 0 cannot be raised to a non-positive power")
    work = np.where(zero, 1.0, arr)
    ang = np.angle(work)
    # numpy maps a negative-zero imaginary part to arg = -pi; the
    # principal branch used throughout is (-pi, pi].
    ang = np.where(ang == -np.pi, np.pi, ang)
    out = np.exp(p * (np.log(np.abs(work)) + 1j * ang))
    out = np.where(zero, 0.0, out)
    return complex(out) if scalar else out


def _gamma_series(a, z, max_terms=700):
    """Upper gamma via the lower-incomplete power series (small |z|)."""
    z = np.asarray(z, dtype=complex)
    term = np.ones_like(z)           # (-z)^k / k!
    total = term / a
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, max_terms):
        term = term * (-z) / k
        contrib = term / (a + k)
        total = np.where(active, total + contrib, total)
        small = np.abs(contrib) <= 1e-17 * np.abs(total)
        active &= ~(small & (np.abs(term) <= np.abs(total) + 1.0))
        if not active.any():
            break
    else:
        raise ConvergenceError("upper_gamma: power series did not converge")
    return _sp.gamma(a) - principal_power(z, a) * total


def _gamma_lentz(a, z, max_iters=6000):
    """Upper gamma via the modified-Lentz continued fraction (large |z|)."""
    z = np.asarray(z, dtype=complex)
    b = z + 1.0 - a
    c = np.full_like(z, 1.0 / _FPMIN)
    d = 1.0 / np.where(np.abs(b) < _FPMIN, _FPMIN, b)
    h = d.copy()
    active = np.ones(z.shape, dtype=bool)
    for i in range(1, max_iters):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > 1e-16
        if not active.any():
            break
    else:
        raise ConvergenceError("upper_gamma: continued fraction did not converge")
    return np.exp(-z) * principal_power(z, a) * h


_SERIES_RADIUS = 14.0


def upper_gamma(a, z):
    """Upper incomplete gamma function Gamma[a, z] on the principal branch.

    Evaluation strategy: the lower-incomplete power series
    gamma(a,z) = z^a sum_k (-z)^k / (k! (a+k)) with
    Gamma[a,z] = Gamma(a) - gamma(a,z) for |z| <= 14, and the
    modified-Lentz continued fraction beyond.  Intended for
    |arg z| <= pi/2 (purely imaginary and positive-real arguments);
    accuracy degrades toward the negative real axis where the continued
    fraction converges poorly.

    a must be real, non-zero and not a non-positive integer.  z = 0 is
    valid only for a > 0 (returns the complete gamma function).
    Vectorized over z.
    """
    a = float(a)
    if not np.isfinite(a) or a == 0 or (a < 0 and a == int(a)):
        raise ValueError("upper_gamma: order must be real, non-zero and not a non-positive integer")
    arr = np.asarray(z, dtype=complex)
    scalar = np.isscalar(z) or arr.ndim == 0
    arr = np.atleast_1d(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError("upper_gamma: argument must be finite")
    zero = arr == 0
    if np.any(zero) and a <= 0:
        raise ValueError("upper_gamma: z = 0 requires a > 0")

    out = np.empty(arr.shape, dtype=complex)
    if np.any(zero):
        out[zero] = _sp.gamma(a)
    # The power series loses digits to cancellation once exp(-z) decay
    # sets in, which happens along the positive real direction well
    # before |z| reaches the oscillatory-argument series limit; the
    # continued fraction converges quickly exactly there.
    use_cf = (np.abs(arr) > _SERIES_RADIUS) | (arr.real > max(4.0, a + 1.0))
    small = (~zero) & ~use_cf
    if np.any(small):
        out[small] = _gamma_series(a, arr[small])
    big = (~zero) & use_cf
    if np.any(big):
        out[big] = _gamma_lentz(a, arr[big])
    return complex(out[0]) if scalar else out


# ----------------------------------------------------------------------
# Adaptive quadrature
# ----------------------------------------------------------------------

_GL7_X, _GL7_W = leggauss(7)
_GL15_X, _GL15_W = leggauss(15)


def _panel_rule(f, lo, hi):
    """Gauss-Legendre 15/7 pair on a batch of panels.

    lo, hi are 1-D arrays of panel edges.  The integrand may be
    vector-valued: f maps abscissae (n,) to (n,) or (n, m) values, in
    which case m integrals share the panel structure.  Returns
    (I15, err, nevals) with err = |GL15 - GL7| reduced over the value
    axis.
    """
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = np.concatenate([
        (mid[:, None] + half[:, None] * _GL15_X[None, :]).ravel(),
        (mid[:, None] + half[:, None] * _GL7_X[None, :]).ravel(),
    ])
    y = np.asarray(f(x), dtype=complex)
    n = lo.size
    if y.ndim == 1:
        y15 = y[: 15 * n].reshape(n, 15)
        y7 = y[15 * n:].reshape(n, 7)
        i15 = half * (y15 @ _GL15_W)
        i7 = half * (y7 @ _GL7_W)
        return i15, np.abs(i15 - i7), x.size
    m = y.shape[1]
    y15 = y[: 15 * n].reshape(n, 15, m)
    y7 = y[15 * n:].reshape(n, 7, m)
    i15 = half[:, None] * np.einsum("npm,p->nm", y15, _GL15_W)
    i7 = half[:, None] * np.einsum("npm,p->nm", y7, _GL7_W)
    return i15, np.abs(i15 - i7).max(axis=1), x.size


def integrate_adaptive(f, a, b, spec=None, breakpoints=None):
    """Adaptive panel-bisection quadrature of f over [a, b].

    f must map a 1-D ndarray of abscissae to an ndarray of (possibly
    complex) values; a (n, m)-shaped return integrates m integrands
    simultaneously on a shared adaptive grid (refinement driven by the
    worst component).  Panels whose embedded-rule error exceeds their
    share of the global tolerance are bisected until the summed error
    estimate satisfies max(abs_tol, rel_tol * |integral|) or the
    subdivision budget is exhausted (ConvergenceError, carrying the best
    estimate).  Optional breakpoints seed the initial panel edges, which
    is how callers communicate known structure (oscillation periods,
    decades of scale variation).
    """
    spec = spec or QuadratureSpec()
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise ValueError("integrate_adaptive: need finite a < b")

    if breakpoints is None:
        edges = np.array([a, b])
    else:
        pts = np.asarray(sorted(set([a, b]) | {float(p) for p in breakpoints if a < p < b}))
        edges = pts
    lo, hi = edges[:-1], edges[1:]
    vals, errs, nev = _panel_rule(f, lo, hi)
    evaluations = nev

    def _result(total, err_total):
        out = complex(total) if np.ndim(total) == 0 else np.asarray(total)
        return QuadratureResult(out, float(err_total), evaluations, b)

    for _ in range(10 * spec.max_subdivisions):
        total = vals.sum(axis=0)
        err_total = errs.sum()
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(total))))
        if err_total <= tol:
            return _result(total, err_total)
        if lo.size >= spec.max_subdivisions:
            best = _result(total, err_total)
            raise ConvergenceError(
                f"integrate_adaptive: error {err_total:.3e} > tol {tol:.3e} "
                f"after {lo.size} panels", best)
        # proportional tolerance allocation: refine every panel holding
        # more than its width-share of the budget
        width = hi - lo
        share = tol * width / (b - a)
        bad = errs > np.maximum(share, 0.25 * err_total / lo.size)
        if not bad.any():
            bad = errs >= errs.max()
        mid = 0.5 * (lo[bad] + hi[bad])
        nlo = np.concatenate([lo[bad], mid])
        nhi = np.concatenate([mid, hi[bad]])
        nvals, nerrs, nev = _panel_rule(f, nlo, nhi)
        evaluations += nev
        lo = np.concatenate([lo[~bad], nlo])
        hi = np.concatenate([hi[~bad], nhi])
        vals = np.concatenate([vals[~bad], nvals])
        errs = np.concatenate([errs[~bad], nerrs])
    raise ConvergenceError("integrate_adaptive: refinement loop stalled")


def _wynn_epsilon(partials):
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Returns the highest even-column estimate.  Robust to occasional
    zero differences (guarded divisions).
    """
    s = list(partials)
    n = len(s)
    prev = [0.0] * (n + 1)
    cur = list(s)
    best = s[-1]
    for _k in range(n - 1):
        nxt = []
        for j in range(len(cur) - 1):
            diff = cur[j + 1] - cur[j]
            if abs(diff) < 1e-300:
                diff = 1e-300
            nxt.append(prev[j + 1] + 1.0 / diff)
        prev = cur
        cur = nxt
        if _k % 2 == 1 and cur:
            best = cur[-1]
        if len(cur) < 2:
            break
    return best


def integrate_semi_infinite(f, a, spec=None, *, period_hint=None,
                            initial_width=None, growth=1.7, max_panels=None):
    """Integrate f over [a, inf) by panel marching with tail acceleration.

    The tail is swept in panels: half-period panels when ``period_hint``
    is given (oscillatory integrands), geometrically growing panels
    otherwise.  Partial sums are extrapolated with the Wynn epsilon
    algorithm, so alternating slowly-decaying tails (e.g. sin(t)/t)
    converge long before their envelope does.  Marching stops when the
    extrapolated tail estimate meets the tolerance and either the
    extrapolation has stabilised or the envelope |panel|/width has
    fallen below spec.truncation_threshold; it fails with
    ConvergenceError when the panel budget is exhausted first.
    """
    spec = spec or QuadratureSpec()
    a = float(a)
    if max_panels is None:
        max_panels = min(spec.max_subdivisions, 800)
    if period_hint is not None and not period_hint > 0:
        raise ValueError("integrate_semi_infinite: period_hint must be positive")

    panel_spec = QuadratureSpec(
        rel_tol=spec.rel_tol,
        abs_tol=max(spec.abs_tol * 0.05, 1e-300),
        max_subdivisions=spec.max_subdivisions,
        truncation_threshold=spec.truncation_threshold,
    )
    width = (0.5 * period_hint if period_hint is not None
             else (initial_width if initial_width is not None else max(1.0, 0.1 * abs(a))))

    lo = a
    total = 0.0 + 0.0j
    err_panels = 0.0
    evaluations = 0
    partials = []
    panel_vals = []
    ext_prev = None
    ext_ok_streak = 0
    for k in range(max_panels):
        hi = lo + width
        res = integrate_adaptive(f, lo, hi, panel_spec)
        evaluations += res.evaluations
        err_panels += res.error_estimate
        total += res.value
        partials.append(total)
        panel_vals.append(res.value)
        lo = hi
        if period_hint is None:
            width *= growth

        if k >= 3:
            tol = max(spec.abs_tol, spec.rel_tol * abs(total))
            last = abs(panel_vals[-1])
            prev = abs(panel_vals[-2])
            envelope = max(last, prev) / width
            # geometric-remainder surrogate from the trailing panel ratio
            q = last / prev if prev > 0 else 0.0
            rem_geo = last * q / (1.0 - q) if 0.0 < q < 0.95 else np.inf
            ext = _wynn_epsilon(partials[-min(len(partials), 24):])
            ext_delta = abs(ext - ext_prev) if ext_prev is not None else np.inf
            ext_prev = ext
            if envelope < spec.truncation_threshold and min(rem_geo, last) <= tol:
                return QuadratureResult(complex(total), float(err_panels + min(rem_geo, last)),
                                        evaluations, lo)
            ext_ok_streak = ext_ok_streak + 1 if ext_delta <= 0.1 * tol else 0
            if ext_ok_streak >= 2 and k >= 8 and np.isfinite(ext):
                return QuadratureResult(complex(ext), float(err_panels + 3.0 * ext_delta),
                                        evaluations, lo)
    best = QuadratureResult(complex(total), float(err_panels + abs(panel_vals[-1])),
                            evaluations, lo)
    raise ConvergenceError(
        f"integrate_semi_infinite: tail not converged after {max_panels} panels "
        f"(last panel {abs(panel_vals[-1]):.3e})", best)
