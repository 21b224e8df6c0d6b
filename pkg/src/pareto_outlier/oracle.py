"""Exact posterior by enumeration of outlier configurations.

With theta fixed, alpha (gamma integral) and epsilon (beta integral) can
be integrated out in closed form, leaving a finite sum over the 2**n flag
vectors.  When beta is unknown the remaining one-dimensional beta integral
is done by adaptive quadrature.  This module deliberately avoids the
sampler's own special functions and uses :mod:`scipy.special` instead, so it
is an independent check on the Gibbs output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import betaln, gammaincc, gammaln, logsumexp

from .analysis import DiscretePmf
from .exceptions import BudgetExceeded, InfeasibleData, InvalidParameter, QuadratureFailure
from .gibbs import PriorSpec
from .model import ClaimSample

MAX_N_FIXED = 22
MAX_N_UNKNOWN_BETA = 14
_CHUNK_BITS = 16


@dataclass(frozen=True)
class OracleResult:
    outlier_prob: np.ndarray
    k_pmf: DiscretePmf
    alpha_mean: float
    alpha_var: float
    log_normalizer: float
    beta_mean: Optional[float] = None
    beta_var: Optional[float] = None
    n_configs: int = 0

    def as_dict(self):
        d = {"alpha_mean": self.alpha_mean, "alpha_var": self.alpha_var,
             "log_normalizer": self.log_normalizer, "n_configs": self.n_configs,
             "k_mean": self.k_pmf.mean}
        if self.beta_mean is not None:
            d["beta_mean"] = self.beta_mean
            d["beta_var"] = self.beta_var
        for i, p in enumerate(self.outlier_prob):
            d[f"outlier_prob.{i}"] = float(p)
        for j, p in enumerate(self.k_pmf.probs):
            d[f"k_pmf.{j}"] = float(p)
        return d


def _log_q(s, z):
    with np.errstate(divide="ignore"):
        return np.log(gammaincc(s, z))


class _AlphaIntegral:
    """Integral of the alpha-dependent part of the posterior for a given rate ``r``.

    ``log_mass(r)`` is ``log[Gamma(s) Q(s, L r) / r**s]``; the first two raw
    moments of alpha given ``r`` are exposed as well.
    """

    def __init__(self, prior, n):
        self.s = prior.shape + n
        self.lower = prior.lower

    def log_mass(self, r):
        r = np.asarray(r, dtype=float)
        out = gammaln(self.s) - self.s * np.log(r)
        if self.lower > 0:
            out = out + _log_q(self.s, self.lower * r)
        return out

    def moments(self, r):
        r = np.asarray(r, dtype=float)
        s = self.s
        m1 = s / r
        m2 = s * (s + 1) / r ** 2
        if self.lower > 0:
            z = self.lower * r
            q0 = gammaincc(s, z)
            m1 = m1 * gammaincc(s + 1, z) / q0
            m2 = m2 * gammaincc(s + 2, z) / q0
        return m1, m2


def _bits(start, stop, n):
    masks = np.arange(start, stop, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def _check_common(sample, priors):
    if priors.basic:
        raise InvalidParameter("the oracle covers the outlier model, not the basic baseline")
    if not priors.theta_fixed:
        raise InvalidParameter("the oracle requires a fixed theta")
    theta = float(priors.theta.value)
    if theta > sample.values.min():
        raise InfeasibleData(f"fixed theta={theta:g} exceeds the smallest claim")
    return theta


def _constant(sample, priors):
    # normalizers of the alpha and epsilon priors and the 1/prod(x) factor
    a = priors.alpha
    c = a.shape * math.log(a.rate) - gammaln(a.shape) - sample.sum_log
    if a.lower > 0:
        c -= float(_log_q(a.shape, a.lower * a.rate))
    return c - betaln(priors.epsilon.a, priors.epsilon.b)


def _finish(logw, bits, k, n, alpha_m1, alpha_m2, const, beta_m1=None, beta_m2=None):
    logz = logsumexp(logw)
    w = np.exp(logw - logz)
    probs = w @ bits
    pmf = np.bincount(k, weights=w, minlength=n + 1)
    a1 = float(w @ alpha_m1)
    a2 = float(w @ alpha_m2)
    out = dict(outlier_prob=np.clip(probs, 0.0, 1.0), k_pmf=DiscretePmf(pmf / pmf.sum()),
               alpha_mean=a1, alpha_var=a2 - a1 * a1, log_normalizer=float(logz + const),
               n_configs=int(bits.shape[0]))
    if beta_m1 is not None:
        b1 = float(w @ beta_m1)
        out.update(beta_mean=b1, beta_var=float(w @ beta_m2) - b1 * b1)
    return OracleResult(**out)


def oracle_fixed(sample: ClaimSample, priors: PriorSpec) -> OracleResult:
    """Exact posterior summaries with theta and beta fixed.

    Every one of the ``2**n`` flag vectors is visited; infeasible ones
    (a flagged claim below ``beta * theta``) get zero weight.
    """
    theta = _check_common(sample, priors)
    if not priors.beta_fixed:
        raise InvalidParameter("oracle_fixed requires a fixed beta; use oracle_unknown_beta")
    n = sample.n
    if n > MAX_N_FIXED:
        raise BudgetExceeded(f"n={n} exceeds the enumeration budget of {MAX_N_FIXED}")
    beta = float(priors.beta.value)
    ai = _AlphaIntegral(priors.alpha, n)
    b1, b2 = priors.epsilon.a, priors.epsilon.b
    base = priors.alpha.rate + sample.sum_log - n * math.log(theta)
    eligible = (sample.values >= beta * theta).astype(np.int8)
    total = 1 << n
    step = 1 << min(_CHUNK_BITS, n)
    parts_logw, parts_bits, parts_k, parts_m1, parts_m2 = [], [], [], [], []
    for start in range(0, total, step):
        bits = _bits(start, min(start + step, total), n)
        feasible = ~np.any(bits > eligible, axis=1)
        bits = bits[feasible]
        k = bits.sum(axis=1).astype(np.int64)
        r = base - k * math.log(beta)
        logw = betaln(b1 + k, b2 + n - k) + ai.log_mass(r)
        m1, m2 = ai.moments(r)
        parts_logw.append(logw)
        parts_bits.append(bits)
        parts_k.append(k)
        parts_m1.append(m1)
        parts_m2.append(m2)
    bits = np.vstack(parts_bits)
    result = _finish(np.concatenate(parts_logw), bits.astype(float), np.concatenate(parts_k), n,
                     np.concatenate(parts_m1), np.concatenate(parts_m2), _constant(sample, priors))
    return result


class _BetaIntegrals:
    """Quadrature over beta for one (k, x*) pair, in log space."""

    def __init__(self, ai, prior, base, k, upper, rtol):
        self.ai, self.k, self.upper, self.rtol = ai, k, upper, rtol
        self.lam, self.lo = prior.rate, prior.lower
        self.base = base

    def log_integrand(self, b):
        r = self.base - self.k * np.log(b)
        return math.log(self.lam) - self.lam * (b - self.lo) + self.ai.log_mass(r)

    def _quad(self, f, a, b):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=self.rtol, limit=500)
            except integrate.IntegrationWarning as exc:
                raise QuadratureFailure(f"beta integral (k={self.k}) did not converge: {exc}") from None
        return val

    def compute(self):
        """Return log of the mass and the first two moments of alpha and beta."""
        a, b = self.lo, self.upper
        if math.isinf(b):
            grid = a + np.geomspace(1e-6, 1e3, 200) / self.lam
        else:
            grid = np.linspace(a, b, 201)[1:]
        c = float(np.max(self.log_integrand(grid)))

        def rel(t):
            return math.exp(float(self.log_integrand(t)) - c)

        def r_of(t):
            return self.base - self.k * math.log(t)

        mass = self._quad(rel, a, b)
        if not mass > 0:
            raise QuadratureFailure(f"beta integral (k={self.k}) vanished")
        eb = self._quad(lambda t: t * rel(t), a, b) / mass
        eb2 = self._quad(lambda t: t * t * rel(t), a, b) / mass
        ea = self._quad(lambda t: float(self.ai.moments(r_of(t))[0]) * rel(t), a, b) / mass
        ea2 = self._quad(lambda t: float(self.ai.moments(r_of(t))[1]) * rel(t), a, b) / mass
        return c + math.log(mass), ea, ea2, eb, eb2


def beta_integrals(sample, priors, k, upper, rtol=1e-8, closed_form=True):
    """Beta-integrated weight pieces for a configuration with ``k`` flags.

    ``upper`` is ``x* / theta`` (``inf`` when ``k == 0``).  For ``k == 0`` the
    integrand no longer depends on beta through the likelihood, so the
    integral is the prior mass times the alpha integral; ``closed_form=False``
    forces quadrature anyway.
    """
    theta = float(priors.theta.value)
    n = sample.n
    ai = _AlphaIntegral(priors.alpha, n)
    base = priors.alpha.rate + sample.sum_log - n * math.log(theta)
    pb = priors.beta
    if k == 0 and closed_form:
        m1, m2 = ai.moments(base)
        eb = pb.lower + 1.0 / pb.rate
        return float(ai.log_mass(base)), float(m1), float(m2), eb, eb * eb + 1.0 / pb.rate ** 2
    return _BetaIntegrals(ai, pb, base, k, upper, rtol).compute()


def oracle_unknown_beta(sample: ClaimSample, priors: PriorSpec, rtol=1e-8) -> OracleResult:
    """Exact posterior summaries with theta fixed and a shifted-exponential beta prior.

    The flag vectors are still enumerated one by one; the beta integral for
    each depends only on ``k`` and the smallest flagged claim, and is cached
    on that pair.
    """
    theta = _check_common(sample, priors)
    if priors.beta_fixed:
        raise InvalidParameter("oracle_unknown_beta requires an unknown beta")
    n = sample.n
    if n > MAX_N_UNKNOWN_BETA:
        raise BudgetExceeded(f"n={n} exceeds the enumeration budget of {MAX_N_UNKNOWN_BETA}")
    b1, b2 = priors.epsilon.a, priors.epsilon.b
    x = sample.values
    bits = _bits(0, 1 << n, n)
    k = bits.sum(axis=1).astype(np.int64)
    xstar = np.where(bits == 1, x[None, :], np.inf).min(axis=1)
    upper = xstar / theta
    feasible = upper > priors.beta.lower
    cache = {}
    logw = np.full(bits.shape[0], -np.inf)
    m = np.zeros((bits.shape[0], 4))
    for idx in np.flatnonzero(feasible):
        key = (int(k[idx]), float(upper[idx]))
        if key not in cache:
            cache[key] = beta_integrals(sample, priors, key[0], key[1], rtol=rtol)
        lm, ea, ea2, eb, eb2 = cache[key]
        logw[idx] = betaln(b1 + k[idx], b2 + n - k[idx]) + lm
        m[idx] = (ea, ea2, eb, eb2)
    keep = np.isfinite(logw)
    return _finish(logw[keep], bits[keep].astype(float), k[keep], n, m[keep, 0], m[keep, 1],
                   _constant(sample, priors), m[keep, 2], m[keep, 3])
