"""Pareto and scale-inflated Pareto densities, likelihoods and simulation.

All densities are returned on the log scale; a value below the support
threshold gets ``-inf`` rather than an exception.  Exceptions are reserved
for parameters outside their domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptySample, InvalidParameter, LengthMismatch, NonPositiveClaim


@dataclass(frozen=True)
class ClaimSample:
    """Claim amounts in input order.

    Use :func:`validate_dataset` to build one from untrusted input.
    """

    values: np.ndarray
    log_values: np.ndarray = field(init=False, repr=False)
    sum_log: float = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        logs = np.log(values)
        logs.setflags(write=False)
        object.__setattr__(self, "log_values", logs)
        object.__setattr__(self, "sum_log", float(math.fsum(logs)))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    theta: float
    beta: float
    epsilon: float

    def __post_init__(self):
        check_params(self.alpha, self.theta, self.beta, self.epsilon)


@dataclass(frozen=True)
class IndicatorVector:
    """Outlier flags; ``delta[i] == 1`` assigns claim ``i`` to the inflated component."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta)
        if d.ndim != 1 or not np.all((d == 0) | (d == 1)):
            raise InvalidParameter("indicators must be a 1-d sequence of 0/1 flags")
        d = d.astype(np.int8)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @property
    def k(self) -> int:
        return int(self.delta.sum())

    def __len__(self):
        return int(self.delta.size)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, dtype=np.int8))

    def is_feasible(self, sample: ClaimSample, theta: float, beta: float) -> bool:
        if len(self) != sample.n:
            return False
        thresholds = np.where(self.delta == 1, beta * theta, theta)
        return bool(np.all(sample.values >= thresholds))


@dataclass(frozen=True)
class LabeledSyntheticSample:
    sample: ClaimSample
    truth: IndicatorVector
    params: ModelParams


def check_params(alpha, theta, beta, epsilon):
    if not (np.isfinite(alpha) and alpha > 0):
        raise InvalidParameter(f"alpha must be > 0, got {alpha!r}")
    if not (np.isfinite(theta) and theta > 0):
        raise InvalidParameter(f"theta must be > 0, got {theta!r}")
    if not (np.isfinite(beta) and beta > 1):
        raise InvalidParameter(f"beta must be > 1, got {beta!r}")
    if not 0 <= epsilon <= 1:
        raise InvalidParameter(f"epsilon must lie in [0, 1], got {epsilon!r}")


def _check_shape_scale(alpha, theta):
    if not (np.isfinite(alpha) and alpha > 0):
        raise InvalidParameter(f"alpha must be > 0, got {alpha!r}")
    if not (np.isfinite(theta) and theta > 0):
        raise InvalidParameter(f"theta must be > 0, got {theta!r}")


def validate_dataset(raw) -> ClaimSample:
    """Check that every claim is a positive finite real and wrap them.

    Parameters
    ----------
    raw : sequence of float
        Claim amounts. Order is preserved.

    Raises
    ------
    EmptySample
        If ``raw`` has no entries.
    NonPositiveClaim
        For the first entry that is not a positive finite number.
    """
    values = list(raw)
    if len(values) == 0:
        raise EmptySample("claim sample is empty")
    out = np.empty(len(values))
    for i, v in enumerate(values):
        try:
            fv = float(v)
        except (TypeError, ValueError):
            raise NonPositiveClaim(i, v) from None
        if not (math.isfinite(fv) and fv > 0):
            raise NonPositiveClaim(i, v)
        out[i] = fv
    return ClaimSample(out)


def pareto_log_pdf(x, alpha, theta):
    """Log density of Pareto(alpha, theta); ``-inf`` below ``theta``.

    Vectorized over ``x``.
    """
    _check_shape_scale(alpha, theta)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.log(alpha) + alpha * math.log(theta) - (alpha + 1.0) * np.log(x)
    out = np.where(x >= theta, out, -np.inf)
    return out[()] if out.ndim == 0 else out


def pareto_pdf(x, alpha, theta):
    return np.exp(pareto_log_pdf(x, alpha, theta))


def pareto_cdf(x, alpha, theta):
    _check_shape_scale(alpha, theta)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x >= theta, -np.expm1(alpha * np.log(theta / np.maximum(x, theta))), 0.0)
    return out[()] if out.ndim == 0 else out


def mixture_log_pdf(x, params: ModelParams):
    """Log density of the two-component scale-inflated mixture."""
    a, t, b, e = params.alpha, params.theta, params.beta, params.epsilon
    base = pareto_log_pdf(x, a, t)
    inflated = pareto_log_pdf(x, a, b * t)
    with np.errstate(divide="ignore"):
        lw0 = math.log1p(-e) if e < 1 else -math.inf
        lw1 = math.log(e) if e > 0 else -math.inf
    out = np.logaddexp(lw0 + base, lw1 + inflated)
    return out[()] if np.ndim(out) == 0 else out


def mixture_pdf(x, params: ModelParams):
    return np.exp(mixture_log_pdf(x, params))


def component_log_pdf(x, params: ModelParams, delta):
    """Log density of claim ``x`` given its component flag ``delta``."""
    if delta not in (0, 1):
        raise InvalidParameter(f"delta must be 0 or 1, got {delta!r}")
    scale = params.theta * (params.beta if delta else 1.0)
    return pareto_log_pdf(x, params.alpha, scale)


def joint_log_likelihood(sample: ClaimSample, params: ModelParams, delta: IndicatorVector) -> float:
    """Log likelihood of the claims given parameters and outlier flags."""
    if len(delta) != sample.n:
        raise LengthMismatch(f"indicator length {len(delta)} != sample size {sample.n}")
    if not delta.is_feasible(sample, params.theta, params.beta):
        return -math.inf
    n, k, a = sample.n, delta.k, params.alpha
    return (n * math.log(a) + a * (k * math.log(params.beta) + n * math.log(params.theta))
            - (a + 1.0) * sample.sum_log)


def pareto_quantile(p, alpha, theta):
    """Quantile ``theta * (1 - p) ** (-1 / alpha)`` of Pareto(alpha, theta)."""
    _check_shape_scale(alpha, theta)
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise InvalidParameter("p must lie strictly between 0 and 1")
    out = theta * np.exp(-np.log1p(-p) / alpha)
    return out[()] if out.ndim == 0 else out


def simulate_claims(n_std, n_out, params: ModelParams, rng) -> LabeledSyntheticSample:
    """Draw ``n_std`` standard claims followed by ``n_out`` inflated claims.

    Draws use the inverse transform ``scale * u ** (-1 / alpha)``; the
    returned truth labels mark the final ``n_out`` entries.
    """
    from .sampling import as_stream

    if n_std < 0 or n_out < 0 or n_std + n_out < 1:
        raise InvalidParameter("need n_std, n_out >= 0 and n_std + n_out >= 1")
    stream = as_stream(rng)
    # 1 - U lies in (0, 1], so claims are finite and never below the scale
    u = 1.0 - stream.uniforms(n_std + n_out)
    scales = np.concatenate([np.full(n_std, params.theta), np.full(n_out, params.beta * params.theta)])
    values = scales * np.exp(-np.log(u) / params.alpha)
    truth = np.concatenate([np.zeros(n_std, np.int8), np.ones(n_out, np.int8)])
    return LabeledSyntheticSample(ClaimSample(values), IndicatorVector(truth), params)
