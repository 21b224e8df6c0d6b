"""Bayesian Pareto scale-inflated outlier model.

Claims follow ``(1 - eps) Pareto(alpha, theta) + eps Pareto(alpha, beta*theta)``;
a Gibbs sampler draws the parameters and the per-claim outlier flags, and an
enumeration oracle gives exact answers for small samples.
"""

from .analysis import (DiscretePmf, OutlierReport, ParameterSummary, SummaryReport,
                       batch_means_mcse, beta_binomial_pmf, k_posterior_pmf, outlier_probabilities,
                       posterior_report, predictive_cdf, predictive_quantile, predictive_quantiles,
                       summarize_parameter)
from .datasets import BUILTINS, BuiltinDataset, load_builtin
from .estimator import ParetoOutlierGibbs
from .exceptions import *  # noqa: F403
from .gibbs import (BetaPrior, ChainState, Fixed, GammaPrior, GibbsConfig, PriorSpec,
                    ShiftedExpPrior, Trace, gibbs_sweep, init_state, run_chain, run_chains)
from .model import (ClaimSample, IndicatorVector, ModelParams, joint_log_likelihood,
                    mixture_log_pdf, mixture_pdf, pareto_cdf, pareto_log_pdf, pareto_pdf, pareto_quantile,
                    simulate_claims)
from .oracle import OracleResult, oracle_fixed, oracle_unknown_beta
from .sampling import RandomStream

__version__ = "0.1.0"
