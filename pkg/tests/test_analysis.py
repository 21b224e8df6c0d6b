import math

import numpy as np
import pytest
from scipy import stats

from pareto_outlier import (DiscretePmf, GibbsConfig, Trace, batch_means_mcse, beta_binomial_pmf,
                            k_posterior_pmf, load_builtin, outlier_probabilities, pareto_quantile,
                            posterior_report, predictive_cdf, predictive_quantile, run_chains,
                            summarize_parameter)
from pareto_outlier.analysis import (conditional_outlier_proba, gamma_shape_predictive_cdf,
                                     gamma_shape_predictive_quantile, histogram, k_pmf_mcse,
                                     outlier_probability_from_params, sampled_parameters)
from pareto_outlier.exceptions import InvalidParameter, TooFewDraws


def make_trace(alpha, theta=1.0, beta=2.0, eps=0.1, k=None):
    alpha = np.asarray(alpha, float)
    m = alpha.size
    full = lambda v: np.full(m, v, float) if np.ndim(v) == 0 else np.asarray(v, float)  # noqa: E731
    return Trace(alpha=alpha, theta=full(theta), beta=full(beta), epsilon=full(eps),
                 k=np.zeros(m, np.int64) if k is None else np.asarray(k, np.int64),
                 chain=np.zeros(m, np.int64), iteration=np.arange(1, m + 1))


def test_batch_means_iid():
    x = np.random.default_rng(0).normal(size=40_000)
    assert batch_means_mcse(x) == pytest.approx(1 / math.sqrt(40_000), rel=0.15)


def test_batch_means_ar1_sees_autocorrelation():
    g = np.random.default_rng(1)
    phi, m = 0.9, 250_000
    e = g.normal(size=m)
    x = np.empty(m)
    x[0] = e[0]
    for i in range(1, m):
        x[i] = phi * x[i - 1] + e[i]
    # long-run variance of AR(1): sigma^2 / (1 - phi)^2
    assert batch_means_mcse(x) == pytest.approx(math.sqrt(1 / (1 - phi) ** 2 / m), rel=0.2)


def test_summarize_parameter():
    x = np.arange(101.0)
    s = summarize_parameter(x)
    assert s.mean == 50 and s.median == 50 and s.n_draws == 101
    assert s.sd == pytest.approx(np.std(x, ddof=1))
    assert s.quantiles[0.025] == pytest.approx(2.5)
    assert s.quantiles[0.975] == pytest.approx(97.5)
    assert set(s.as_dict("a.")) >= {"a.mean", "a.sd", "a.q0.025", "a.mcse_mean"}
    with pytest.raises(TooFewDraws):
        summarize_parameter([1.0])


def test_discrete_pmf():
    p = DiscretePmf(np.array([0.2, 0.3, 0.5]))
    assert p.mean == pytest.approx(1.3)
    assert p.sd == pytest.approx(math.sqrt(0.2 * 1.69 + 0.3 * 0.09 + 0.5 * 0.49))
    assert p.median == 1 and p.cdf(1) == pytest.approx(0.5)
    # an exact half at k is resolved to k
    assert DiscretePmf(np.array([0.5, 0.5])).median == 0
    assert p.total_variation(DiscretePmf(np.array([0.2, 0.3, 0.4, 0.1]))) == pytest.approx(0.1)


@pytest.mark.parametrize("b1,b2,n", [(0.1842, 3.5, 20), (2.17484, 19.57356, 20), (1.0, 1.0, 7),
                                     (0.5, 300.0, 400)])
def test_beta_binomial_matches_scipy(b1, b2, n):
    pmf = beta_binomial_pmf(b1, b2, n)
    assert pmf.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(pmf.probs, stats.betabinom(n, b1, b2).pmf(np.arange(n + 1)), rtol=1e-10)
    assert pmf.mean == pytest.approx(n * b1 / (b1 + b2), rel=1e-10)


def test_beta_binomial_validation():
    with pytest.raises(InvalidParameter):
        beta_binomial_pmf(0.0, 1.0, 5)
    with pytest.raises(InvalidParameter):
        beta_binomial_pmf(1.0, 1.0, 2.5)


def test_k_posterior_pmf_and_mcse():
    t = make_trace(np.ones(6), k=[0, 1, 1, 2, 2, 2])
    pmf = k_posterior_pmf(t, n=4)
    assert np.allclose(pmf.probs, [1 / 6, 2 / 6, 3 / 6, 0, 0])
    assert k_pmf_mcse(t, n=4).shape == (5,)


def test_predictive_quantile_with_point_mass_posterior():
    # a degenerate posterior gives the Pareto quantile itself
    t = make_trace(np.full(50, 2.5), theta=50000.0)
    for p in (0.5, 0.75, 0.9, 0.95):
        assert predictive_quantile(t, p) == pytest.approx(pareto_quantile(p, 2.5, 50000.0), rel=1e-7)
    assert predictive_cdf(t, 50000.0) == 0.0
    with pytest.raises(InvalidParameter):
        predictive_quantile(t, 1.0)


def test_predictive_quantile_matches_gamma_closed_form():
    shape, rate, theta = 20.001, 10.24, 50000.0
    g = np.random.default_rng(3)
    t = make_trace(g.gamma(shape, 1 / rate, 200_000), theta=theta)
    for p in (0.5, 0.75, 0.9, 0.95):
        exact = gamma_shape_predictive_quantile(p, shape, rate, theta)
        assert gamma_shape_predictive_cdf(exact, shape, rate, theta) == pytest.approx(p, rel=1e-12)
        assert predictive_quantile(t, p) == pytest.approx(exact, rel=3e-3)


def test_outlier_probabilities_and_rao_blackwell_agree():
    ds = load_builtin("motor-s5")
    t = run_chains(ds.sample, ds.priors, GibbsConfig(burn_in=500, kept=40_000, root_seed=3))
    rep = outlier_probabilities(t, ds.sample)
    assert len(rep) == 20 and np.all(rep.mcse >= 0)
    rb = conditional_outlier_proba(t, ds.sample.values)
    assert np.all(np.abs(rep.probability - rb) < 4 * rep.mcse + 1e-12)
    # 630,000 is below beta * theta = 750,000
    assert rep.probability[2] == 0 and rb[2] == 0
    s = rep.sorted()
    assert np.all(np.diff(s.probability) <= 0)
    assert set(s.index.tolist()) == set(range(20))


def test_outlier_probability_from_params():
    p = outlier_probability_from_params(1.2, 1.5, 0.15)
    z = 0.15 * 1.5**1.2
    assert p == pytest.approx(z / (z + 0.85))
    assert outlier_probability_from_params(1.0, 2.0, 0.0) == 0.0
    assert outlier_probability_from_params(1.0, 2.0, 1.0) == 1.0


def test_histogram_is_a_density():
    h = histogram(np.random.default_rng(0).normal(size=1000), bins=20)
    assert h.heights.size == 20 and h.edges.size == 21
    assert float(np.sum(h.heights * h.widths)) == pytest.approx(1.0)


def test_posterior_report_contents():
    ds = load_builtin("synthetic-s4")
    t = run_chains(ds.sample, ds.priors, GibbsConfig(burn_in=100, kept=2000))
    rep = posterior_report(t, ds.sample, ds.priors)
    assert set(rep.summaries) == {"alpha", "epsilon", "beta", "k"}
    assert rep.sampled == ["alpha", "epsilon", "beta"]
    assert rep.prior_pmf.probs.size == 21 and rep.posterior_pmf.probs.size == 21
    assert list(rep.quantiles) == [0.5, 0.75, 0.9, 0.95]
    basic = posterior_report(run_chains(ds.sample, ds.priors.as_basic(), GibbsConfig(kept=500)),
                             ds.sample, ds.priors.as_basic())
    assert set(basic.summaries) == {"alpha"} and basic.outliers is None
    assert sampled_parameters(load_builtin("medical-s6").priors) == ["alpha", "epsilon", "beta", "theta"]
