"""scikit-learn style front end to the Gibbs sampler."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import analysis
from .gibbs import (BetaPrior, Fixed, GammaPrior, GibbsConfig, PriorSpec, ShiftedExpPrior,
                    run_chains)
from .model import validate_dataset


def _as_claims(X):
    arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=False)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single column of claims, got shape {arr.shape}")
        arr = arr[:, 0]
    return arr


class ParetoOutlierGibbs(BaseEstimator):
    """Bayesian scale-inflated Pareto outlier model fitted by Gibbs sampling.

    Claims are modelled as Pareto(alpha, theta) with probability
    ``1 - epsilon`` and Pareto(alpha, beta * theta) otherwise.

    Parameters
    ----------
    alpha_shape, alpha_rate : float
        Gamma prior on the tail index ``alpha``.
    alpha_lower : float
        Lower truncation point of the alpha prior (0 for none).
    epsilon_a, epsilon_b : float
        Beta prior on the contamination probability.
    theta : float or None
        Fixed base threshold; ``None`` puts a gamma(theta_shape, theta_rate)
        prior on it.
    theta_shape, theta_rate : float or None
        Gamma prior on theta, used only when ``theta`` is None.
    beta : float or None
        Fixed scale-inflation factor (> 1); ``None`` puts a shifted
        exponential prior with lower limit ``beta_lower`` and rate
        ``beta_rate`` on it.
    basic : bool
        Fit the plain Pareto model instead (no outlier component).
    burn_in, kept, thin, chains : int
        Sampler run lengths.
    random_state : int
        Root seed; chain ``i`` uses the stream derived from ``(random_state, i)``.
    n_jobs : int
        Number of threads used to run chains.

    Attributes
    ----------
    trace_ : Trace
    outlier_proba_ : ndarray of shape (n_samples,)
        Posterior probability that each training claim is an outlier.
    outlier_mcse_ : ndarray of shape (n_samples,)
    k_pmf_ : DiscretePmf
        Posterior distribution of the number of outliers.
    """

    def __init__(self, *, alpha_shape=0.001, alpha_rate=0.001, alpha_lower=0.0,
                 epsilon_a=0.1842, epsilon_b=3.5, theta=None, theta_shape=None, theta_rate=None,
                 beta=None, beta_lower=1.0, beta_rate=1.0, basic=False, burn_in=10_000,
                 kept=200_000, thin=1, chains=1, random_state=0, n_jobs=1):
        self.alpha_shape = alpha_shape
        self.alpha_rate = alpha_rate
        self.alpha_lower = alpha_lower
        self.epsilon_a = epsilon_a
        self.epsilon_b = epsilon_b
        self.theta = theta
        self.theta_shape = theta_shape
        self.theta_rate = theta_rate
        self.beta = beta
        self.beta_lower = beta_lower
        self.beta_rate = beta_rate
        self.basic = basic
        self.burn_in = burn_in
        self.kept = kept
        self.thin = thin
        self.chains = chains
        self.random_state = random_state
        self.n_jobs = n_jobs

    @classmethod
    def from_priors(cls, priors: PriorSpec, config: GibbsConfig = GibbsConfig(), **kwargs):
        params = dict(alpha_shape=priors.alpha.shape, alpha_rate=priors.alpha.rate,
                      alpha_lower=priors.alpha.lower, epsilon_a=priors.epsilon.a,
                      epsilon_b=priors.epsilon.b, basic=priors.basic,
                      burn_in=config.burn_in, kept=config.kept, thin=config.thin,
                      chains=config.chains, random_state=config.root_seed)
        if priors.theta_fixed:
            params["theta"] = priors.theta.value
        else:
            params.update(theta_shape=priors.theta.shape, theta_rate=priors.theta.rate)
        if priors.beta_fixed:
            params["beta"] = priors.beta.value
        else:
            params.update(beta_lower=priors.beta.lower, beta_rate=priors.beta.rate)
        params.update(kwargs)
        return cls(**params)

    def prior_spec(self) -> PriorSpec:
        if self.theta is not None:
            theta = Fixed(float(self.theta))
        elif self.theta_shape is None or self.theta_rate is None:
            raise ValueError("theta is unknown: set theta_shape and theta_rate, or fix theta")
        else:
            theta = GammaPrior(self.theta_shape, self.theta_rate)
        beta = Fixed(float(self.beta)) if self.beta is not None else ShiftedExpPrior(self.beta_lower,
                                                                                    self.beta_rate)
        return PriorSpec(GammaPrior(self.alpha_shape, self.alpha_rate, self.alpha_lower),
                         BetaPrior(self.epsilon_a, self.epsilon_b), theta, beta, basic=self.basic)

    def gibbs_config(self) -> GibbsConfig:
        return GibbsConfig(burn_in=self.burn_in, kept=self.kept, thin=self.thin,
                           chains=self.chains, root_seed=self.random_state)

    def fit(self, X, y=None):
        """Run the sampler on the claims in ``X`` (1-d, or one column)."""
        self.sample_ = validate_dataset(_as_claims(X))
        self.n_features_in_ = 1
        self.priors_ = self.prior_spec()
        self.trace_ = run_chains(self.sample_, self.priors_, self.gibbs_config(), n_jobs=self.n_jobs)
        report = analysis.outlier_probabilities(self.trace_, self.sample_)
        self.outlier_proba_ = report.probability
        self.outlier_mcse_ = report.mcse
        self.k_pmf_ = analysis.k_posterior_pmf(self.trace_, self.sample_.n)
        return self

    def summary(self):
        """Posterior summaries of every sampled parameter and of k."""
        check_is_fitted(self, "trace_")
        out = {name: analysis.summarize_parameter(getattr(self.trace_, name))
               for name in analysis.sampled_parameters(self.priors_)}
        if not self.basic:
            out["k"] = analysis.summarize_parameter(self.trace_.k)
        return out

    def outlier_report(self):
        check_is_fitted(self, "trace_")
        return analysis.outlier_probabilities(self.trace_, self.sample_)

    def predict_proba(self, X):
        """Probability of the standard and the inflated component for each claim.

        Columns are ``[P(standard), P(outlier)]``, averaging the conditional
        flag probability over the posterior draws.
        """
        check_is_fitted(self, "trace_")
        p = analysis.conditional_outlier_proba(self.trace_, _as_claims(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        """1 for claims more likely than not to be outliers, else 0."""
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

    def predictive_cdf(self, x):
        check_is_fitted(self, "trace_")
        return analysis.predictive_cdf(self.trace_, x)

    def predictive_quantile(self, p):
        check_is_fitted(self, "trace_")
        if np.ndim(p) == 0:
            return analysis.predictive_quantile(self.trace_, float(p))
        return np.array([analysis.predictive_quantile(self.trace_, float(q)) for q in p])
