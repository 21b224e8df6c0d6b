"""Gibbs sampler for the scale-inflated Pareto outlier model.

One sweep updates, in this order: the shape ``alpha``, the contamination
probability ``epsilon``, the outlier flags ``delta``, the inflation factor
``beta`` (when unknown) and the base scale ``theta`` (when unknown).  Each
sweep consumes exactly ``n + 5`` uniforms:

    u[0]          alpha
    u[1], u[2]    epsilon (ratio of two gamma variates)
    u[3:3+n]      delta
    u[3+n]        beta
    u[4+n]        theta

Updates that are switched off (fixed parameters, the no-outlier baseline)
still consume their uniforms, so the stream layout never depends on the
prior configuration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numba
import numpy as np

from .exceptions import (EmptyTruncationMass, InfeasibleData, InvalidParameter,
                         NumericalError)
from .model import ClaimSample, IndicatorVector
from .sampling import (RandomStream, as_stream, beta_nb, shifted_trunc_exp_nb,
                       truncated_gamma_nb)

_OK, _EMPTY_MASS, _INFEASIBLE, _BAD_RATE = 0, 1, 2, 3
_CHUNK = 8192


# -- priors -----------------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    value: float


@dataclass(frozen=True)
class GammaPrior:
    """gamma(shape, rate), optionally truncated below at ``lower``."""

    shape: float
    rate: float
    lower: float = 0.0

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0 and np.isfinite(self.shape) and np.isfinite(self.rate)):
            raise InvalidParameter(f"gamma prior needs positive shape and rate, got {self}")
        if not (self.lower >= 0 and np.isfinite(self.lower)):
            raise InvalidParameter(f"gamma truncation point must be >= 0, got {self.lower!r}")

    @property
    def mean(self):
        return self.shape / self.rate


@dataclass(frozen=True)
class BetaPrior:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidParameter(f"beta prior needs positive a and b, got {self}")

    @property
    def mean(self):
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class ShiftedExpPrior:
    """Density ``rate * exp(-rate * (beta - lower))`` on ``beta > lower``."""

    lower: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if not (self.lower >= 1 and np.isfinite(self.lower)):
            raise InvalidParameter(f"lower limit of beta must be >= 1, got {self.lower!r}")
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise InvalidParameter(f"beta prior rate must be positive, got {self.rate!r}")


@dataclass(frozen=True)
class PriorSpec:
    """Priors for every parameter, with theta and beta either fixed or unknown.

    ``basic=True`` turns the model into the plain Pareto model: epsilon and
    every outlier flag are held at zero and beta is never updated.
    """

    alpha: GammaPrior
    epsilon: BetaPrior
    theta: Union[Fixed, GammaPrior]
    beta: Union[Fixed, ShiftedExpPrior]
    basic: bool = False

    def __post_init__(self):
        if not isinstance(self.alpha, GammaPrior):
            raise InvalidParameter("alpha prior must be a GammaPrior")
        if not isinstance(self.epsilon, BetaPrior):
            raise InvalidParameter("epsilon prior must be a BetaPrior")
        if isinstance(self.theta, Fixed):
            if not (self.theta.value > 0 and np.isfinite(self.theta.value)):
                raise InvalidParameter(f"fixed theta must be positive, got {self.theta.value!r}")
        elif isinstance(self.theta, GammaPrior):
            if self.theta.lower != 0:
                raise InvalidParameter("theta prior cannot be truncated")
        else:
            raise InvalidParameter("theta must be Fixed or GammaPrior")
        if isinstance(self.beta, Fixed):
            if not (self.beta.value > 1 and np.isfinite(self.beta.value)):
                raise InvalidParameter(f"fixed beta must exceed 1, got {self.beta.value!r}")
        elif not isinstance(self.beta, ShiftedExpPrior):
            raise InvalidParameter("beta must be Fixed or ShiftedExpPrior")

    @property
    def theta_fixed(self):
        return isinstance(self.theta, Fixed)

    @property
    def beta_fixed(self):
        return isinstance(self.beta, Fixed)

    def as_basic(self):
        return PriorSpec(self.alpha, self.epsilon, self.theta, self.beta, basic=True)

    def to_dict(self):
        d = {"alpha.shape": self.alpha.shape, "alpha.rate": self.alpha.rate,
             "alpha.lower_trunc": self.alpha.lower,
             "epsilon.a": self.epsilon.a, "epsilon.b": self.epsilon.b, "basic": self.basic}
        if self.theta_fixed:
            d.update({"theta.mode": "fixed", "theta.value": self.theta.value})
        else:
            d.update({"theta.mode": "unknown", "theta.shape": self.theta.shape,
                      "theta.rate": self.theta.rate})
        if self.beta_fixed:
            d.update({"beta.mode": "fixed", "beta.value": self.beta.value})
        else:
            d.update({"beta.mode": "unknown", "beta.lower": self.beta.lower,
                      "beta.lambda": self.beta.rate})
        return d


# -- state and configuration -------------------------------------------------

@dataclass(frozen=True)
class ChainState:
    alpha: float
    theta: float
    beta: float
    epsilon: float
    delta: IndicatorVector

    @property
    def k(self):
        return self.delta.k

    def is_feasible(self, sample: ClaimSample, priors: Optional[PriorSpec] = None) -> bool:
        if not (self.alpha > 0 and self.theta > 0 and self.beta > 1 and 0 <= self.epsilon <= 1):
            return False
        if priors is not None and self.alpha < priors.alpha.lower:
            return False
        return self.delta.is_feasible(sample, self.theta, self.beta)

    def replace(self, **changes):
        values = {"alpha": self.alpha, "theta": self.theta, "beta": self.beta,
                  "epsilon": self.epsilon, "delta": self.delta}
        values.update(changes)
        return ChainState(**values)


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 10_000
    kept: int = 200_000
    thin: int = 1
    chains: int = 1
    root_seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise InvalidParameter("burn_in must be >= 0")
        if self.kept < 1 or self.thin < 1 or self.chains < 1:
            raise InvalidParameter("kept, thin and chains must all be >= 1")
        if not 0 <= self.root_seed < 2**64:
            raise InvalidParameter("root_seed must be a 64-bit unsigned integer")


def block_layout(n_records):
    """Batch size and count used for batch-means standard errors.

    ``floor(sqrt(N))`` batches of ``N // floor(sqrt(N))`` records; any
    remainder is left out of the batch means.
    """
    n_batches = max(int(math.isqrt(n_records)), 1)
    return n_records // n_batches, n_batches


@dataclass
class Trace:
    """Post burn-in draws of one or more chains.

    Outlier flags are not stored per record.  ``delta_block_sums[j, i]``
    counts how often claim ``i`` was flagged within record block ``j``;
    ``block_sizes[j]`` is the number of records in that block.
    """

    alpha: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    epsilon: np.ndarray
    k: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    delta_block_sums: Optional[np.ndarray] = None
    block_sizes: Optional[np.ndarray] = None
    config: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.alpha.size)

    @property
    def n_records(self):
        return len(self)

    @property
    def delta_sums(self):
        if self.delta_block_sums is None:
            return None
        return self.delta_block_sums.sum(axis=0)

    def column(self, name):
        return getattr(self, name)

    @classmethod
    def concatenate(cls, traces):
        traces = list(traces)
        if len(traces) == 1:
            return traces[0]
        cat = {name: np.concatenate([getattr(t, name) for t in traces])
               for name in ("alpha", "theta", "beta", "epsilon", "k", "chain", "iteration")}
        if all(t.delta_block_sums is not None for t in traces):
            cat["delta_block_sums"] = np.vstack([t.delta_block_sums for t in traces])
            cat["block_sizes"] = np.concatenate([t.block_sizes for t in traces])
        return cls(**cat, config=dict(traces[0].config))


# -- compiled updates ----------------------------------------------------------

@numba.njit(cache=True)
def alpha_rate_nb(a2, sum_log, n, k, theta, beta):
    return a2 + (sum_log - n * math.log(theta) - k * math.log(beta))


@numba.njit(cache=True)
def update_alpha_nb(n, sum_log, k, theta, beta, a1, a2, lower, u):
    rate = alpha_rate_nb(a2, sum_log, n, k, theta, beta)
    if not rate > 0.0:
        return math.nan
    return truncated_gamma_nb(a1 + n, rate, lower, math.inf, u)


@numba.njit(cache=True)
def update_epsilon_nb(n, k, b1, b2, u1, u2):
    return beta_nb(b1 + k, b2 + n - k, u1, u2)


@numba.njit(cache=True)
def outlier_prob_nb(alpha, beta, eps):
    """Conditional probability of the inflated component for a claim >= beta*theta."""
    if eps <= 0.0:
        return 0.0
    if eps >= 1.0:
        return 1.0
    logit = alpha * math.log(beta) + math.log(eps) - math.log1p(-eps)
    if logit > 0:
        return 1.0 / (1.0 + math.exp(-logit))
    e = math.exp(logit)
    return e / (1.0 + e)


@numba.njit(cache=True)
def update_deltas_nb(x, alpha, theta, beta, eps, u, out):
    p = outlier_prob_nb(alpha, beta, eps)
    cut = beta * theta
    k = 0
    for i in range(x.size):
        if x[i] >= cut and u[i] < p:
            out[i] = 1
            k += 1
        else:
            out[i] = 0
    return k


@numba.njit(cache=True)
def beta_upper_nb(x, delta, theta):
    xstar = math.inf
    for i in range(x.size):
        if delta[i] == 1 and x[i] < xstar:
            xstar = x[i]
    return xstar / theta


@numba.njit(cache=True)
def update_beta_nb(x, delta, k, alpha, theta, lower, lam, u):
    if k == 0:
        return shifted_trunc_exp_nb(lam, lower, math.inf, u)
    upper = beta_upper_nb(x, delta, theta)
    if not upper > lower:
        return math.nan
    # exp(-lam * beta) * beta**(alpha*k) is a gamma(alpha*k + 1, lam) kernel
    return truncated_gamma_nb(alpha * k + 1.0, lam, lower, upper, u)


@numba.njit(cache=True)
def theta_upper_nb(x, delta, beta):
    m = math.inf
    for i in range(x.size):
        v = x[i] / beta if delta[i] == 1 else x[i]
        if v < m:
            m = v
    return m


@numba.njit(cache=True)
def update_theta_nb(x, delta, alpha, beta, t1, t2, u):
    upper = theta_upper_nb(x, delta, beta)
    return truncated_gamma_nb(t1 + alpha * x.size, t2, 0.0, upper, u)


@numba.njit(cache=True)
def _feasible_nb(x, delta, theta, beta, alpha, lower):
    if not (alpha >= lower and alpha > 0.0 and beta > 1.0 and theta > 0.0):
        return False
    cut = beta * theta
    for i in range(x.size):
        if x[i] < theta:
            return False
        if delta[i] == 1 and x[i] < cut:
            return False
    return True


@numba.njit(cache=True, nogil=True)
def _run_sweeps(x, sum_log, state, delta, u, rec_idx, block_idx, out_vals, out_k,
                block_sums, a1, a2, a_lower, b1, b2, beta_known, beta_lower, lam,
                theta_known, t1, t2, basic, check):
    """Run ``u.shape[0]`` sweeps in place.

    ``state`` holds (alpha, theta, beta, epsilon).  Sweep ``s`` is recorded
    at ``rec_idx[s]`` when that is non-negative, and its flags are added to
    row ``block_idx[s]`` of ``block_sums``.
    """
    n = x.size
    alpha, theta, beta, eps = state[0], state[1], state[2], state[3]
    k = 0
    for i in range(n):
        k += delta[i]
    for s in range(u.shape[0]):
        row = u[s]
        alpha = update_alpha_nb(n, sum_log, k, theta, beta, a1, a2, a_lower, row[0])
        if math.isnan(alpha):
            return _BAD_RATE, s
        if not basic:
            eps = update_epsilon_nb(n, k, b1, b2, row[1], row[2])
            k = update_deltas_nb(x, alpha, theta, beta, eps, row[3:3 + n], delta)
            if not beta_known:
                beta = update_beta_nb(x, delta, k, alpha, theta, beta_lower, lam, row[3 + n])
                if math.isnan(beta):
                    return _EMPTY_MASS, s
        if not theta_known:
            theta = update_theta_nb(x, delta, alpha, beta, t1, t2, row[4 + n])
            if math.isnan(theta):
                return _EMPTY_MASS, s
        if check and not _feasible_nb(x, delta, theta, beta, alpha, a_lower):
            return _INFEASIBLE, s
        r = rec_idx[s]
        if r >= 0:
            out_vals[r, 0] = alpha
            out_vals[r, 1] = theta
            out_vals[r, 2] = beta
            out_vals[r, 3] = eps
            out_k[r] = k
            b = block_idx[s]
            for i in range(n):
                block_sums[b, i] += delta[i]
        state[0], state[1], state[2], state[3] = alpha, theta, beta, eps
    state[0], state[1], state[2], state[3] = alpha, theta, beta, eps
    return _OK, u.shape[0]


# -- Python-level operations ----------------------------------------------------

def init_state(sample: ClaimSample, priors: PriorSpec, rng=None) -> ChainState:
    """Deterministic feasible starting point with every flag at zero.

    ``rng`` is accepted for interface symmetry and not consumed.
    """
    xmin = float(sample.values.min())
    if priors.theta_fixed:
        theta = float(priors.theta.value)
        if theta > xmin:
            raise InfeasibleData(
                f"fixed theta={theta:g} exceeds the smallest claim {xmin:g}; "
                "no parameter value is consistent with the data")
    else:
        theta = 0.95 * xmin
    beta = float(priors.beta.value) if priors.beta_fixed else priors.beta.lower + 1.0
    alpha = max(priors.alpha.mean, priors.alpha.lower + 0.1)
    eps = 0.0 if priors.basic else priors.epsilon.mean
    return ChainState(alpha, theta, beta, eps, IndicatorVector.zeros(sample.n))


def _x(sample):
    return np.ascontiguousarray(sample.values, dtype=np.float64)


def update_alpha(state: ChainState, sample: ClaimSample, priors: PriorSpec, rng) -> float:
    """Draw alpha from gamma(a1 + n, a2 + sum ln(x_i / (beta^delta_i theta))).

    The draw is truncated below at the prior's truncation point.
    """
    p = priors.alpha
    rate = float(alpha_rate_nb(p.rate, sample.sum_log, sample.n, state.k, state.theta, state.beta))
    assert rate >= p.rate * (1 - 1e-9), "alpha conditional rate below prior rate: infeasible state"
    value = update_alpha_nb(sample.n, sample.sum_log, state.k, state.theta, state.beta,
                            p.shape, p.rate, p.lower, as_stream(rng).uniform())
    if math.isnan(value):
        raise EmptyTruncationMass("alpha conditional has no mass above its truncation point")
    return float(value)


def update_epsilon(state: ChainState, sample: ClaimSample, priors: PriorSpec, rng) -> float:
    """Draw epsilon from beta(b1 + k, b2 + n - k)."""
    u1, u2 = as_stream(rng).uniforms(2)
    return float(update_epsilon_nb(sample.n, state.k, priors.epsilon.a, priors.epsilon.b, u1, u2))


def update_deltas(state: ChainState, sample: ClaimSample, priors: PriorSpec, rng) -> IndicatorVector:
    """Redraw every outlier flag independently given the other parameters."""
    u = as_stream(rng).uniforms(sample.n)
    out = np.zeros(sample.n, dtype=np.int8)
    update_deltas_nb(_x(sample), state.alpha, state.theta, state.beta, state.epsilon, u, out)
    return IndicatorVector(out)


def update_beta(state: ChainState, sample: ClaimSample, priors: PriorSpec, rng) -> float:
    """Draw beta from its prior tilted by ``beta ** (alpha * k)``.

    The support is capped at ``x* / theta`` with ``x*`` the smallest flagged
    claim.  Returns the fixed value unchanged when beta is known.
    """
    if priors.beta_fixed:
        return float(priors.beta.value)
    u = as_stream(rng).uniform()
    value = update_beta_nb(_x(sample), state.delta.delta, state.k, state.alpha, state.theta,
                           priors.beta.lower, priors.beta.rate, u)
    if math.isnan(value):
        raise EmptyTruncationMass("beta window is empty; state violates feasibility")
    return float(value)


def update_theta(state: ChainState, sample: ClaimSample, priors: PriorSpec, rng) -> float:
    """Draw theta from gamma(t1 + alpha*n, t2) truncated to (0, min x_i / beta^delta_i)."""
    if priors.theta_fixed:
        return float(priors.theta.value)
    u = as_stream(rng).uniform()
    value = update_theta_nb(_x(sample), state.delta.delta, state.alpha, state.beta,
                            priors.theta.shape, priors.theta.rate, u)
    if math.isnan(value):
        raise EmptyTruncationMass("theta conditional mass underflows on its window")
    return float(value)


def gibbs_sweep(state: ChainState, sample: ClaimSample, priors: PriorSpec, rng) -> ChainState:
    """One full sweep through the Python-level updates (same draws as the compiled path)."""
    stream = as_stream(rng)
    u = stream.uniforms(sample.n + 5)
    rows = _SingleRowStream(u)
    alpha = update_alpha(state, sample, priors, rows.take(1))
    state = state.replace(alpha=alpha)
    if priors.basic:
        rows.take(2 + sample.n + 1)
    else:
        state = state.replace(epsilon=update_epsilon(state, sample, priors, rows.take(2)))
        state = state.replace(delta=update_deltas(state, sample, priors, rows.take(sample.n)))
        state = state.replace(beta=update_beta(state, sample, priors, rows.take(1)))
    state = state.replace(theta=update_theta(state, sample, priors, rows.take(1)))
    return state


class _SingleRowStream:
    """Hands out consecutive slices of a pre-drawn uniform row."""

    def __init__(self, u):
        self._u = u
        self._pos = 0

    def take(self, m):
        s = _Slice(self._u[self._pos:self._pos + m])
        self._pos += m
        return s


class _Slice(RandomStream):
    def __init__(self, u):  # noqa: D107 - deliberately skips RandomStream.__init__
        self._u = u
        self._i = 0
        self.seed, self.index = None, None

    def uniform(self):
        v = float(self._u[self._i])
        self._i += 1
        return v

    def uniforms(self, size):
        v = self._u[self._i:self._i + size]
        self._i += size
        return v


def state_to_array(state: ChainState):
    return np.array([state.alpha, state.theta, state.beta, state.epsilon], dtype=np.float64)


def run_chain(sample: ClaimSample, priors: PriorSpec, config: GibbsConfig, chain_index=0,
              check=False, initial_state: Optional[ChainState] = None) -> Trace:
    """Run one chain and return its post burn-in trace.

    Performs ``burn_in + kept * thin`` sweeps and records every ``thin``-th
    sweep after burn-in.  With ``check=True`` feasibility is verified after
    every sweep.
    """
    stream = RandomStream(config.root_seed).spawn(chain_index)
    state = initial_state if initial_state is not None else init_state(sample, priors, stream)
    if not state.is_feasible(sample, priors):
        raise InfeasibleData("initial state is infeasible for this sample")
    x = _x(sample)
    n = sample.n
    n_rec = config.kept
    block_size, n_full = block_layout(n_rec)
    n_blocks = n_full + (1 if n_full * block_size < n_rec else 0)
    block_sizes = np.full(n_blocks, block_size, dtype=np.int64)
    if n_blocks > n_full:
        block_sizes[-1] = n_rec - n_full * block_size
    vals = np.empty((n_rec, 4))
    ks = np.empty(n_rec, dtype=np.int64)
    block_sums = np.zeros((n_blocks, n), dtype=np.int64)
    st = state_to_array(state)
    delta = np.array(state.delta.delta, dtype=np.int8)
    total = config.burn_in + config.kept * config.thin
    p = priors
    theta_prior = (0.0, 0.0) if p.theta_fixed else (p.theta.shape, p.theta.rate)
    beta_prior = (0.0, 0.0) if p.beta_fixed else (p.beta.lower, p.beta.rate)
    done = 0
    while done < total:
        m = min(_CHUNK, total - done)
        u = stream.uniforms((m, n + 5))
        post = np.arange(done, done + m) - config.burn_in
        keep = (post >= 0) & ((post + 1) % config.thin == 0)
        rec_idx = np.where(keep, (post + 1) // config.thin - 1, -1).astype(np.int64)
        blk = np.where(keep, np.minimum(rec_idx // block_size, n_blocks - 1), -1).astype(np.int64)
        status, at = _run_sweeps(x, sample.sum_log, st, delta, u, rec_idx, blk, vals, ks, block_sums,
                                 p.alpha.shape, p.alpha.rate, p.alpha.lower,
                                 p.epsilon.a, p.epsilon.b, p.beta_fixed, beta_prior[0], beta_prior[1],
                                 p.theta_fixed, theta_prior[0], theta_prior[1], p.basic, check)
        if status == _EMPTY_MASS:
            raise EmptyTruncationMass(f"truncated conditional lost all mass at sweep {done + at}")
        if status == _BAD_RATE:
            raise NumericalError(f"alpha conditional rate became non-positive at sweep {done + at}")
        if status == _INFEASIBLE:
            raise InfeasibleData(f"state became infeasible at sweep {done + at}")
        done += m
    iteration = (np.arange(n_rec) + 1) * config.thin
    echo = {"priors": p.to_dict(), "gibbs": asdict(config), "chain_index": chain_index}
    return Trace(alpha=vals[:, 0].copy(), theta=vals[:, 1].copy(), beta=vals[:, 2].copy(),
                 epsilon=vals[:, 3].copy(), k=ks, chain=np.full(n_rec, chain_index, dtype=np.int64),
                 iteration=iteration, delta_block_sums=block_sums, block_sizes=block_sizes,
                 config=echo)


def run_chains(sample: ClaimSample, priors: PriorSpec, config: GibbsConfig, n_jobs=1,
               check=False) -> Trace:
    """Run ``config.chains`` independent chains and concatenate their traces.

    Chains share nothing mutable; with ``n_jobs > 1`` they run on threads
    (the compiled sweep releases the GIL).
    """
    indices = range(config.chains)
    if n_jobs == 1 or config.chains == 1:
        traces = [run_chain(sample, priors, config, i, check=check) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            traces = list(pool.map(lambda i: run_chain(sample, priors, config, i, check=check), indices))
    return Trace.concatenate(traces)
