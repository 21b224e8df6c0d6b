"""Posterior summaries computed from traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from .exceptions import ConvergenceFailure, InvalidParameter, TooFewDraws
from .gibbs import Trace, block_layout, outlier_prob_nb
from .model import ClaimSample

QUANTILE_LEVELS = (0.025, 0.25, 0.5, 0.75, 0.975)
PREDICTIVE_LEVELS = (0.5, 0.75, 0.9, 0.95)


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    sd: float
    median: float
    quantiles: dict
    mcse_mean: float
    n_draws: int

    def as_dict(self, prefix=""):
        d = {f"{prefix}mean": self.mean, f"{prefix}sd": self.sd, f"{prefix}median": self.median,
             f"{prefix}mcse_mean": self.mcse_mean, f"{prefix}n_draws": self.n_draws}
        for q, v in self.quantiles.items():
            d[f"{prefix}q{q:g}"] = v
        return d


def batch_means_mcse(draws):
    """Batch-means Monte Carlo standard error of the sample mean.

    Uses ``floor(sqrt(N))`` batches of equal length; trailing draws that do
    not fill a batch are dropped.
    """
    x = np.asarray(draws, dtype=float)
    n = x.size
    size, n_batches = block_layout(n)
    if n_batches < 2:
        return float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    means = x[:size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def summarize_parameter(draws) -> ParameterSummary:
    x = np.asarray(draws, dtype=float)
    if x.size < 2:
        raise TooFewDraws(f"need at least 2 draws, got {x.size}")
    qs = np.quantile(x, QUANTILE_LEVELS)  # numpy's default is the type-7 rule
    return ParameterSummary(mean=float(x.mean()), sd=float(x.std(ddof=1)),
                            median=float(np.median(x)),
                            quantiles={q: float(v) for q, v in zip(QUANTILE_LEVELS, qs)},
                            mcse_mean=batch_means_mcse(x), n_draws=int(x.size))


@dataclass(frozen=True)
class DiscretePmf:
    """Probability mass function on ``0..n``."""

    probs: np.ndarray

    @property
    def support(self):
        return np.arange(self.probs.size)

    @property
    def mean(self):
        return float(np.dot(self.support, self.probs))

    @property
    def sd(self):
        m = self.mean
        return float(math.sqrt(max(np.dot((self.support - m) ** 2, self.probs), 0.0)))

    @property
    def median(self):
        return int(np.searchsorted(np.cumsum(self.probs), 0.5 - 1e-12))

    def cdf(self, k):
        return float(self.probs[:int(k) + 1].sum())

    def total_variation(self, other):
        m = max(self.probs.size, other.probs.size)
        a = np.pad(self.probs, (0, m - self.probs.size))
        b = np.pad(other.probs, (0, m - other.probs.size))
        return 0.5 * float(np.abs(a - b).sum())


def k_posterior_pmf(trace: Trace, n=None) -> DiscretePmf:
    """Empirical pmf of the recorded outlier counts."""
    if len(trace) == 0:
        raise TooFewDraws("trace is empty")
    if n is None:
        n = trace.delta_block_sums.shape[1] if trace.delta_block_sums is not None else int(trace.k.max())
    counts = np.bincount(trace.k, minlength=n + 1)[:n + 1]
    return DiscretePmf(counts / counts.sum())


def k_pmf_mcse(trace: Trace, n=None):
    """Batch-means standard error of every entry of the empirical k pmf."""
    if n is None:
        n = trace.delta_block_sums.shape[1] if trace.delta_block_sums is not None else int(trace.k.max())
    return np.array([batch_means_mcse(trace.k == j) for j in range(n + 1)])


def beta_binomial_pmf(b1, b2, n) -> DiscretePmf:
    """Marginal pmf of the outlier count when epsilon ~ beta(b1, b2)."""
    if not (b1 > 0 and b2 > 0):
        raise InvalidParameter("b1 and b2 must be positive")
    if int(n) != n or n < 1:
        raise InvalidParameter("n must be a positive integer")
    k = np.arange(n + 1)
    logp = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            + betaln(b1 + k, b2 + n - k) - betaln(b1, b2))
    return DiscretePmf(np.exp(logp))


@dataclass(frozen=True)
class OutlierReport:
    index: np.ndarray
    claim: np.ndarray
    probability: np.ndarray
    mcse: np.ndarray

    def sorted(self):
        """Rows ordered by descending probability (ties keep input order)."""
        order = np.argsort(-self.probability, kind="stable")
        return OutlierReport(self.index[order], self.claim[order], self.probability[order],
                             self.mcse[order])

    def __len__(self):
        return int(self.index.size)

    def rows(self):
        return zip(self.index.tolist(), self.claim.tolist(), self.probability.tolist(),
                   self.mcse.tolist())


def outlier_probabilities(trace: Trace, sample: ClaimSample) -> OutlierReport:
    """Posterior probability that each claim came from the inflated component.

    The standard errors use the trace's full-size record blocks as batches.
    """
    if trace.delta_block_sums is None:
        raise InvalidParameter("trace carries no outlier-flag sums")
    sums = trace.delta_block_sums
    probs = sums.sum(axis=0) / trace.block_sizes.sum()
    full = trace.block_sizes == trace.block_sizes.max()
    if full.sum() >= 2:
        means = sums[full] / trace.block_sizes[full][:, None]
        mcse = means.std(axis=0, ddof=1) / math.sqrt(full.sum())
    else:
        mcse = np.zeros(sample.n)
    return OutlierReport(np.arange(sample.n), np.asarray(sample.values, float), probs, mcse)


def conditional_outlier_proba(trace: Trace, x):
    """Rao-Blackwellized probability that a claim of size ``x`` is an outlier.

    Averages the conditional flag probability over the draws; for the
    observed claims this estimates the same quantity as
    :func:`outlier_probabilities` with lower variance.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    logit = trace.alpha * np.log(trace.beta)
    with np.errstate(divide="ignore"):
        logit = logit + np.log(trace.epsilon) - np.log1p(-trace.epsilon)
    p = 0.5 * (1.0 + np.tanh(0.5 * logit))
    cut = trace.beta * trace.theta
    return np.array([float(np.mean(np.where(xi >= cut, p, 0.0))) for xi in x])


def predictive_cdf(trace: Trace, x):
    """Posterior predictive CDF of a standard (non-outlier) claim."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise InvalidParameter("x must be positive")
    out = np.empty(xs.size)
    log_theta = np.log(trace.theta)
    for j, xv in enumerate(xs):
        logr = np.minimum(log_theta - math.log(xv), 0.0)
        out[j] = float(np.mean(-np.expm1(trace.alpha * logr)))
    return out[0] if np.ndim(x) == 0 else out


def predictive_quantile(trace: Trace, p, rtol=1e-8):
    """Quantile of the posterior predictive for standard claims.

    The bracket starts at the smallest sampled theta and doubles until it
    covers ``p``; bisection (on the log scale) then narrows it to ``rtol``.
    """
    if not 0 < p < 1:
        raise InvalidParameter("p must lie strictly between 0 and 1")
    lo = float(np.min(trace.theta))
    hi = 2.0 * lo
    for _ in range(200):
        if predictive_cdf(trace, hi) >= p:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceFailure(f"no bracket for p={p} within 200 doublings")
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi)
        if predictive_cdf(trace, mid) >= p:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def predictive_quantiles(trace: Trace, levels=PREDICTIVE_LEVELS):
    return {p: predictive_quantile(trace, p) for p in levels}


def gamma_shape_predictive_cdf(x, shape, rate, theta):
    """Predictive CDF when theta is fixed and alpha ~ gamma(shape, rate).

    Closed form from the gamma moment generating function:
    ``1 - (rate / (rate + ln(x / theta))) ** shape``.
    """
    x = np.asarray(x, dtype=float)
    L = np.log(np.maximum(x, theta) / theta)
    return -np.expm1(shape * (np.log(rate) - np.log(rate + L)))


def gamma_shape_predictive_quantile(p, shape, rate, theta):
    """Inverse of :func:`gamma_shape_predictive_cdf`: ``theta * exp(rate * ((1-p)**(-1/shape) - 1))``."""
    return theta * math.exp(rate * math.expm1(-math.log1p(-p) / shape))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    heights: np.ndarray

    @property
    def widths(self):
        return np.diff(self.edges)


def histogram(draws, bins=50) -> Histogram:
    """Equal-width density histogram over [min, max] of the draws."""
    x = np.asarray(draws, dtype=float)
    if x.size < 1 or bins < 1:
        raise InvalidParameter("need at least one draw and one bin")
    heights, edges = np.histogram(x, bins=int(bins), density=True)
    return Histogram(edges, heights)


def outlier_probability_from_params(alpha, beta, epsilon):
    return float(outlier_prob_nb(alpha, beta, epsilon))


@dataclass
class SummaryReport:
    """Everything a run reports: parameter summaries, k pmfs, outliers, predictive quantiles."""

    summaries: dict
    prior_pmf: "DiscretePmf | None"
    posterior_pmf: "DiscretePmf | None"
    outliers: "OutlierReport | None"
    quantiles: dict

    @property
    def sampled(self):
        return [name for name in self.summaries if name != "k"]


def sampled_parameters(priors):
    names = ["alpha"]
    if not priors.basic:
        names.append("epsilon")
        if not priors.beta_fixed:
            names.append("beta")
    if not priors.theta_fixed:
        names.append("theta")
    return names


def posterior_report(trace: Trace, sample: "ClaimSample | None", priors,
                     levels=PREDICTIVE_LEVELS) -> SummaryReport:
    names = sampled_parameters(priors)
    summaries = {name: summarize_parameter(getattr(trace, name)) for name in names}
    prior_pmf = post_pmf = outliers = None
    if not priors.basic:
        summaries["k"] = summarize_parameter(trace.k)
        n = sample.n if sample is not None else None
        post_pmf = k_posterior_pmf(trace, n)
        prior_pmf = beta_binomial_pmf(priors.epsilon.a, priors.epsilon.b, post_pmf.probs.size - 1)
        if sample is not None and trace.delta_block_sums is not None:
            outliers = outlier_probabilities(trace, sample)
    return SummaryReport(summaries, prior_pmf, post_pmf, outliers, predictive_quantiles(trace, levels))
