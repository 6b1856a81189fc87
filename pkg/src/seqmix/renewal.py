"""Limiting overshoot summaries for one-sided likelihood-ratio walks.

For each alternative the pair (kappa, delta) summarizes the limiting
overshoot distribution of the walk over a large boundary: kappa is its
mean and delta the Laplace transform (at 1) of its law.  Three routes
are provided: the Gaussian series, the exponential-distribution closed
form, and a generic Monte Carlo estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from ._math import norm_cdf, norm_pdf
from .engine import default_step_cap
from .errors import ConfigError, ConvergenceError, NonPositiveDriftError
from .models import DiscreteAlternatives, kl_numbers

_SERIES_CAP = 10**6
_METHODS = ("series", "closed-form", "monte-carlo")


@dataclass(frozen=True)
class OvershootSummary:
    """Mean overshoot kappa and Laplace transform delta, with provenance.

    Standard errors are zero for analytic methods.  ``arithmetic`` marks
    summaries estimated from lattice-valued increments, for which the
    limiting law is not well defined (kept for plumbing tests only).
    """

    kappa: float
    delta: float
    method: str
    stderr_kappa: float = 0.0
    stderr_delta: float = 0.0
    arithmetic: bool = False

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ConfigError("kappa must be finite and nonnegative")
        if not (0.0 < self.delta <= 1.0):
            raise ConfigError("delta must lie in (0, 1]")
        if self.delta < math.exp(-self.kappa) * (1.0 - 1e-12):
            raise ConfigError("delta < exp(-kappa) violates Jensen's inequality")
        if self.stderr_kappa < 0.0 or self.stderr_delta < 0.0:
            raise ConfigError("standard errors must be nonnegative")


def _series(mu: float, tol: float, term_fn, tail_scale: float) -> float:
    """Sum term_fn(n) until both the term and a geometric tail bound fall
    below the (margin-tightened) tolerance."""
    if mu == 0.0:
        raise ConfigError("mu must be nonzero (the walk needs positive drift)")
    if not tol > 0.0:
        raise ConfigError("tol must be positive")
    m = abs(mu)
    # Phi(-x) <= exp(-x^2/2)/2 and phi(x) <= exp(-x^2/2), so terms decay
    # at least geometrically with ratio q per unit n.
    q = math.exp(-m * m / 8.0)
    cut = tol / 8.0
    total = 0.0
    for n in range(1, _SERIES_CAP + 1):
        term = term_fn(m, n)
        total += term
        tail = tail_scale * q ** (n + 1) / (1.0 - q)
        if term < cut and tail < cut:
            return total
    raise ConvergenceError(f"overshoot series did not converge within {_SERIES_CAP} terms")


def _kappa_term(m: float, n: int) -> float:
    x = m * math.sqrt(n) / 2.0
    return norm_pdf(x) / math.sqrt(n) - (m / 2.0) * norm_cdf(-x)


def _delta_term(m: float, n: int) -> float:
    return norm_cdf(-m * math.sqrt(n) / 2.0) / n


def gaussian_kappa(mu: float, tol: float = 1e-8) -> float:
    """Limiting mean overshoot for the unit-variance Gaussian walk with mean mu.

    The defining series is truncated once the current term and an
    analytic Gaussian-tail bound both drop below the tolerance, so the
    result is accurate to O(tol).  The overshoot law depends on mu only
    through mu^2, hence |mu| is used.
    """
    m = abs(mu)
    s = _series(mu, tol, _kappa_term, tail_scale=1.0 / math.sqrt(2.0 * math.pi))
    return 1.0 + m * m / 4.0 - m * s


def gaussian_delta(mu: float, tol: float = 1e-8) -> float:
    """Laplace transform of the limiting Gaussian overshoot law (same truncation)."""
    m = abs(mu)
    s = _series(mu, tol, _delta_term, tail_scale=0.5)
    return math.exp(-2.0 * s) / (m * m / 2.0)


def gaussian_overshoot_summary(mu: float, tol: float = 1e-8) -> OvershootSummary:
    return OvershootSummary(
        kappa=gaussian_kappa(mu, tol), delta=gaussian_delta(mu, tol), method="series"
    )


def exp_family_exponential_summary(theta: float) -> OvershootSummary:
    """Exact overshoot summary for the exponential-rate family on theta in (0, 1).

    The overshoot of the walk over any boundary above 0 is exactly
    exponential with rate (1-theta)/theta, by memorylessness of the
    jumps.  Its mean is theta/(1-theta) and its Laplace transform at 1
    is 1-theta (the transform of an Exp(r) law is r/(1+r)).
    """
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ConfigError("theta must lie in (0, 1)")
    return OvershootSummary(kappa=theta / (1.0 - theta), delta=1.0 - theta, method="closed-form")


def _walk_overshoots(
    model: DiscreteAlternatives,
    sample_index: int,
    walk_index: int,
    log_threshold: float,
    reps: int,
    seed: int,
    max_n: int,
    ctx: int,
) -> np.ndarray:
    """Overshoots of the walk Z^{walk_index} under P_{sample_index}, one per rep."""
    reps = int(reps)
    over = np.empty(reps)
    for c in range(_rng.n_chunks(reps)):
        rows = min(_rng.CHUNK, reps - c * _rng.CHUNK)
        z = np.zeros(_rng.CHUNK)
        active = np.arange(rows)
        got = np.full(_rng.CHUNK, np.nan)
        t = 0
        block = 0
        while active.size:
            block += 1
            rng = _rng.block_rng(seed, _rng.ROLE_OVERSHOOT, ctx, c, block)
            obs = np.asarray(model.sample_alt(sample_index, rng, size=(_rng.CHUNK, _rng.BLOCK)))
            inc = model.loglr(walk_index, obs)
            for col in range(_rng.BLOCK):
                t += 1
                z[active] += inc[active, col]
                hit = z[active] >= log_threshold
                idx = active[hit]
                got[idx] = z[idx] - log_threshold
                active = active[~hit]
                if not active.size:
                    break
                if t >= max_n:
                    raise ConvergenceError(
                        f"{active.size} replications did not cross log A = "
                        f"{log_threshold:g} within {max_n} steps; check the drift"
                    )
        over[c * _rng.CHUNK : c * _rng.CHUNK + rows] = got[:rows]
    return over


def _summarize(over: np.ndarray, arithmetic: bool) -> OvershootSummary:
    n = over.size
    e = np.exp(-over)
    se_k = float(over.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    se_d = float(e.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return OvershootSummary(
        kappa=float(over.mean()),
        delta=float(e.mean()),
        method="monte-carlo",
        stderr_kappa=se_k,
        stderr_delta=se_d,
        arithmetic=arithmetic,
    )


def mc_overshoot_summary(
    model: DiscreteAlternatives,
    i: int,
    log_threshold: float | None = None,
    reps: int = 100_000,
    seed: int = 0,
    max_n: int | None = None,
) -> OvershootSummary:
    """Monte Carlo estimate of (kappa_i, delta_i) for alternative i.

    Runs the one-sided test of alternative i against the null, under
    P_i, to the given boundary and summarizes the overshoots.  The
    default boundary is 25 * I_i, far enough that the pre-limit bias is
    below the Monte Carlo noise at the default replication count.
    Replication r draws from a stream derived deterministically from
    (seed, r); a replication exceeding the step cap raises, since the
    positive drift makes that a configuration error.
    """
    i = model._check_index(i)
    klm = kl_numbers(model)
    drift = float(klm.info[i])
    if log_threshold is None:
        log_threshold = 25.0 * drift
    if not log_threshold > 0.0:
        raise ConfigError("log_threshold must be positive")
    if max_n is None:
        max_n = default_step_cap(log_threshold, drift)
    over = _walk_overshoots(model, i, i, float(log_threshold), reps, seed, int(max_n), ctx=i)
    return _summarize(over, model.arithmetic)


def overshoot_cross_summary(
    model: DiscreteAlternatives,
    i: int,
    i_star: int,
    log_threshold: float | None = None,
    reps: int = 100_000,
    seed: int = 0,
    max_n: int | None = None,
) -> OvershootSummary:
    """Monte Carlo estimate of the cross overshoot summary (kappa_{i|i*}, delta_{i|i*}).

    Simulates the walk of alternative i_star under P_i.  Requires the
    positive drift I_i - I_{i i*}; coincides with mc_overshoot_summary
    when i == i_star.
    """
    i = model._check_index(i)
    i_star = model._check_index(i_star)
    klm = kl_numbers(model)
    drift = float(klm.info[i] - klm.cross[i, i_star])
    if drift <= 0.0:
        raise NonPositiveDriftError(
            f"E_{i}[Z^({i_star})] = I_{i} - I_({i},{i_star}) = {drift:g} <= 0; "
            "the walk would never cross"
        )
    if log_threshold is None:
        log_threshold = 25.0 * drift
    if not log_threshold > 0.0:
        raise ConfigError("log_threshold must be positive")
    if max_n is None:
        max_n = default_step_cap(log_threshold, drift)
    # same stream as mc_overshoot_summary when i == i_star, so the two calls
    # return bit-identical summaries; otherwise a disjoint ctx per (i, i_star)
    ctx = i if i == i_star else model.k + i * model.k + i_star
    over = _walk_overshoots(model, i, i_star, float(log_threshold), reps, seed, int(max_n), ctx=ctx)
    return _summarize(over, model.arithmetic)
