"""Regularized incomplete gamma functions and their inverses.

Everything is evaluated in log space so that windows lying far in either
tail of a gamma distribution (the theta conditional routinely puts its upper
truncation point hundreds of orders of magnitude into the lower tail) can
still be inverted.  The lower function uses the power series for
``x < shape + 1`` and the complement of the Legendre continued fraction
otherwise.

The ``_nb`` functions are numba kernels shared with the Gibbs sweep; the
public wrappers validate arguments.
"""

import math

import numba
import numpy as np

from .exceptions import InvalidParameter

_LN_2PI = math.log(2.0 * math.pi)
_EPS = 1e-17
_FPMIN = 1e-300
_MAX_ITER = 100_000


@numba.njit(cache=True)
def _stirling_error(s):
    # lgamma(s + 1) - [(s + 0.5) ln s - s + 0.5 ln 2pi]
    if s > 15.0:
        s2 = s * s
        return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0) / s2) / s2) / s2) / s
    return math.lgamma(s + 1.0) - (s + 0.5) * math.log(s) + s - 0.5 * _LN_2PI


@numba.njit(cache=True)
def _log_prefactor(s, z):
    """log(z**s * exp(-z) / Gamma(s + 1)), accurate for large ``s``."""
    if s < 10.0:
        return s * math.log(z) - z - math.lgamma(s + 1.0)
    d = (z - s) / s
    if abs(d) < 0.5:
        core = math.log1p(d) - d
    else:
        core = math.log(z / s) - d
    return s * core - 0.5 * (_LN_2PI + math.log(s)) - _stirling_error(s)


@numba.njit(cache=True)
def _log1mexp(a):
    # log(1 - exp(a)) for a <= 0
    if a > -0.6931471805599453:
        return math.log(-math.expm1(a))
    return math.log1p(-math.exp(a))


@numba.njit(cache=True)
def _logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = max(a, b)
    return m + math.log1p(math.exp(-abs(a - b)))


@numba.njit(cache=True)
def _log_series(s, z):
    # log of sum_{n>=0} z^n / ((s+1)...(s+n))
    term = 1.0
    total = 1.0
    n = 1.0
    for _ in range(_MAX_ITER):
        term *= z / (s + n)
        total += term
        if term < total * _EPS:
            break
        n += 1.0
    return math.log(total)


@numba.njit(cache=True)
def _log_contfrac(s, z):
    # modified Lentz evaluation of the continued fraction for Q
    b = z + 1.0 - s
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.log(h)


@numba.njit(cache=True)
def log_gammainc_pq_nb(s, z):
    """Return (log P(s, z), log Q(s, z))."""
    if z <= 0.0:
        return -math.inf, 0.0
    if z == math.inf:
        return 0.0, -math.inf
    lpre = _log_prefactor(s, z)
    if z < s + 1.0:
        lp = lpre + _log_series(s, z)
        if lp > 0.0:
            lp = 0.0
        return lp, _log1mexp(lp)
    lq = lpre + math.log(s) + _log_contfrac(s, z)
    if lq > 0.0:
        lq = 0.0
    return _log1mexp(lq), lq


@numba.njit(cache=True)
def _log_density_w(s, w):
    # log of z * d/dz P(s, z) at z = exp(w)
    return s * w - math.exp(w) - math.lgamma(s)


@numba.njit(cache=True)
def _solve(s, target, upper, lo, hi):
    """Find w = ln z with log P (upper=False) or log Q (upper=True) equal to target.

    ``lo``/``hi`` bound w and may be infinite.
    """
    if upper:
        z0 = s + (-target) + math.sqrt(2.0 * s * (-target))
        w = math.log(max(z0, 1e-300))
    else:
        w = (target + math.lgamma(s + 1.0)) / s
        w = min(w, math.log(s + 1.0))
    if w <= lo or w >= hi:
        if lo > -math.inf and hi < math.inf:
            w = 0.5 * (lo + hi)
        elif lo > -math.inf:
            w = lo + 1.0
        else:
            w = hi - 1.0
    for _ in range(400):
        lp, lq = log_gammainc_pq_nb(s, math.exp(w))
        val = lq if upper else lp
        g = val - target
        if g == 0.0:
            break
        slope = math.exp(_log_density_w(s, w) - val)
        if upper:
            slope = -slope
            if g > 0.0:
                lo = w
            else:
                hi = w
        else:
            if g > 0.0:
                hi = w
            else:
                lo = w
        if slope == 0.0 or not math.isfinite(slope):
            step = math.inf
        else:
            step = g / slope
        wn = w - step
        if not (lo < wn < hi):
            if lo > -math.inf and hi < math.inf:
                wn = 0.5 * (lo + hi)
            elif lo > -math.inf:
                wn = max(lo, w) + 1.0
            else:
                wn = min(hi, w) - 1.0
        if abs(wn - w) <= 1e-15 * max(1.0, abs(w)):
            w = wn
            break
        if lo > -math.inf and hi < math.inf and hi - lo <= 1e-15 * max(1.0, abs(w)):
            w = wn
            break
        w = wn
    return w


@numba.njit(cache=True)
def gamma_window_log_inverse_nb(s, zl, zh, u):
    """Log of the inverse CDF of a standard gamma(s) restricted to [zl, zh].

    Works in whichever tail keeps the target probability small.  Returns
    NaN when the window has no representable mass.
    """
    lmass = gamma_window_logmass_nb(s, zl, zh)
    if lmass == -math.inf or math.isnan(lmass):
        return math.nan
    wl = math.log(zl) if zl > 0.0 else -math.inf
    wh = math.log(zh) if zh < math.inf else math.inf
    if u == 0.0:
        return wl
    lpl, lql = log_gammainc_pq_nb(s, zl)
    lph, lqh = log_gammainc_pq_nb(s, zh)
    lu = math.log(u)
    l1mu = math.log1p(-u)
    lpt = _logaddexp(l1mu + lpl, lu + lph)
    lqt = _logaddexp(l1mu + lql, lu + lqh)
    if lpt <= lqt:
        w = _solve(s, lpt, False, wl, wh)
    else:
        w = _solve(s, lqt, True, wl, wh)
    return min(max(w, wl), wh)


@numba.njit(cache=True)
def gamma_window_inverse_nb(s, zl, zh, u):
    """Inverse CDF of a standard gamma(s) restricted to [zl, zh] at uniform ``u``."""
    w = gamma_window_log_inverse_nb(s, zl, zh, u)
    if math.isnan(w):
        return math.nan
    z = math.exp(w)
    # exp may round one ulp outside the window
    return min(max(z, zl), zh)


@numba.njit(cache=True)
def gamma_window_logmass_nb(s, zl, zh):
    lpl, lql = log_gammainc_pq_nb(s, zl)
    lph, lqh = log_gammainc_pq_nb(s, zh)
    if lph < -0.6931471805599453:
        return lph + _log1mexp(min(lpl - lph, 0.0)) if lpl > -math.inf else lph
    return lql + _log1mexp(min(lqh - lql, 0.0)) if lqh > -math.inf else lql


def _check_shape(shape):
    if not (np.isfinite(shape) and shape > 0):
        raise InvalidParameter(f"shape must be positive and finite, got {shape!r}")


def reg_inc_gamma_p(shape, x):
    """Regularized lower incomplete gamma function P(shape, x)."""
    _check_shape(shape)
    if not x >= 0:
        raise InvalidParameter(f"x must be non-negative, got {x!r}")
    return math.exp(log_gammainc_pq_nb(float(shape), float(x))[0])


def reg_inc_gamma_q(shape, x):
    """Regularized upper incomplete gamma function Q(shape, x) = 1 - P(shape, x)."""
    _check_shape(shape)
    if not x >= 0:
        raise InvalidParameter(f"x must be non-negative, got {x!r}")
    return math.exp(log_gammainc_pq_nb(float(shape), float(x))[1])


def log_reg_inc_gamma(shape, x):
    """Return ``(log P, log Q)`` without leaving log space."""
    _check_shape(shape)
    if not x >= 0:
        raise InvalidParameter(f"x must be non-negative, got {x!r}")
    return log_gammainc_pq_nb(float(shape), float(x))


def reg_inc_gamma_p_inv(shape, p):
    """Return x >= 0 with P(shape, x) = p, for 0 <= p < 1."""
    _check_shape(shape)
    if not 0 <= p < 1:
        raise InvalidParameter(f"p must lie in [0, 1), got {p!r}")
    if p == 0:
        return 0.0
    return gamma_window_inverse_nb(float(shape), 0.0, math.inf, float(p))
