"""Random variate generation for the full conditionals.

Every variate is produced by inverse transform from uniforms.  A sweep of
the sampler therefore consumes a fixed number of uniforms, which is what
makes traces reproducible bit for bit and lets the compiled sweep and these
Python-level helpers share one code path (the ``*_nb`` kernels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import EmptyTruncationMass, InvalidParameter
from .special import gamma_window_inverse_nb, gamma_window_log_inverse_nb

_SEED_LIMIT = 2**64


class RandomStream:
    """Seeded uniform stream backed by PCG64.

    Streams for parallel chains are derived with :meth:`spawn`, which feeds
    ``(seed, index)`` through :class:`numpy.random.SeedSequence` so sibling
    streams are independent and the mapping is stable across runs.
    """

    def __init__(self, seed=0, index=None):
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise InvalidParameter(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.index = index
        key = () if index is None else (int(index),)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))

    def spawn(self, index):
        return RandomStream(self.seed, index)

    def uniform(self):
        return float(self._gen.random())

    def uniforms(self, size):
        return self._gen.random(size)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, index={self.index})"


def as_stream(rng):
    if isinstance(rng, RandomStream):
        return rng
    if rng is None:
        return RandomStream(0)
    if isinstance(rng, (int, np.integer)):
        return RandomStream(int(rng))
    raise TypeError(f"expected RandomStream or integer seed, got {type(rng).__name__}")


@dataclass(frozen=True)
class TruncationWindow:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise InvalidParameter("window bounds must not be NaN")
        if self.lower >= self.upper:
            raise InvalidParameter(f"empty window ({self.lower}, {self.upper})")

    def __contains__(self, x):
        return self.lower <= x <= self.upper


UNBOUNDED = TruncationWindow()


# -- compiled kernels -------------------------------------------------------

@numba.njit(cache=True)
def truncated_gamma_nb(shape, rate, lower, upper, u):
    zl = max(lower, 0.0) * rate
    zh = upper * rate
    z = gamma_window_inverse_nb(shape, zl, zh, u)
    x = z / rate
    if x < lower:
        x = lower
    if x > upper:
        x = upper
    return x


@numba.njit(cache=True)
def beta_nb(a, b, u1, u2):
    # ratio of gamma variates, formed from their logs so tiny shapes cannot
    # produce 0/0
    lx = gamma_window_log_inverse_nb(a, 0.0, math.inf, u1)
    ly = gamma_window_log_inverse_nb(b, 0.0, math.inf, u2)
    if lx == -math.inf and ly == -math.inf:
        return a / (a + b)
    d = ly - lx
    if d > 0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))


@numba.njit(cache=True)
def shifted_trunc_exp_nb(lam, shift, upper, u):
    span = upper - shift
    if span == math.inf:
        x = shift - math.log1p(-u) / lam
    else:
        x = shift - math.log1p(u * math.expm1(-lam * span)) / lam
        if x > upper:
            x = upper
    return x


# -- public draws -----------------------------------------------------------

def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameter(f"{name} must be positive and finite, got {value!r}")


def gamma_draw(shape, rate, rng) -> float:
    """One gamma(shape, rate) variate (rate parameterization, mean shape/rate)."""
    _positive("shape", shape)
    _positive("rate", rate)
    return float(truncated_gamma_nb(float(shape), float(rate), 0.0, math.inf,
                                    as_stream(rng).uniform()))


def truncated_gamma_draw(shape, rate, window: TruncationWindow, rng) -> float:
    """Gamma(shape, rate) conditioned on ``window`` by inverse CDF.

    Raises
    ------
    EmptyTruncationMass
        When the window carries no representable probability.
    """
    _positive("shape", shape)
    _positive("rate", rate)
    if window.upper <= 0:
        raise EmptyTruncationMass(f"window {window} lies outside the gamma support")
    x = truncated_gamma_nb(float(shape), float(rate), float(window.lower), float(window.upper),
                           as_stream(rng).uniform())
    if math.isnan(x):
        raise EmptyTruncationMass(
            f"gamma({shape}, {rate}) has no representable mass on {window}")
    assert x in window
    return float(x)


def beta_draw(a, b, rng) -> float:
    _positive("a", a)
    _positive("b", b)
    stream = as_stream(rng)
    u1, u2 = stream.uniforms(2)
    return float(beta_nb(float(a), float(b), u1, u2))


def bernoulli_draw(p, rng) -> int:
    if not 0 <= p <= 1:
        raise InvalidParameter(f"p must lie in [0, 1], got {p!r}")
    return int(as_stream(rng).uniform() < p)


def shifted_trunc_exp_draw(lam, shift, upper, rng, u=None) -> float:
    """Exponential(lam) shifted to start at ``shift``, optionally capped at ``upper``.

    ``u`` overrides the uniform, which makes the inverse transform checkable.
    """
    _positive("lambda", lam)
    if not np.isfinite(shift):
        raise InvalidParameter(f"shift must be finite, got {shift!r}")
    if upper is None:
        upper = math.inf
    if not upper > shift:
        raise InvalidParameter(f"upper ({upper}) must exceed shift ({shift})")
    if u is None:
        u = as_stream(rng).uniform()
    return float(shifted_trunc_exp_nb(float(lam), float(shift), float(upper), float(u)))
