"""Execution of stopping rules on observation streams.

All likelihood ratios are carried in log space; the mixture statistic is
a max-shifted log-sum-exp, so thresholds spanning hundreds of orders of
magnitude are safe.  States are plain values and runs are side-effect
free given their own stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from ._math import logsumexp
from .errors import ConfigError, QuadratureUnderflowError, StreamExhaustedError
from .mixing import MixingDensity, MixingDistribution
from .models import DiscreteAlternatives, ExpFamilyModel, kl_numbers

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class DiscreteTestState:
    """Running state of the discrete mixture rule.

    ``log_component[i]`` is the log likelihood ratio Z_n^i of alternative
    i; zero-weight components are tracked too (they matter when the true
    alternative carries no weight) but are excluded from the statistic.
    """

    log_component: Array
    n: int
    log_weights: Array

    @property
    def log_statistic(self) -> float:
        return float(logsumexp(self.log_weights + self.log_component))


@dataclass(frozen=True, eq=False)
class ContinuousTestState:
    """Running state of the continuous mixture rule.

    (running_sum, n) is sufficient for the quadrature statistic, so the
    per-step cost does not grow with history length.
    """

    running_sum: float
    n: int
    density: MixingDensity


@dataclass(frozen=True)
class StopReport:
    """Outcome of a run: either stopped at step n with an overshoot, or
    truncated at the step cap."""

    stopped: bool
    n: Optional[int]
    overshoot: Optional[float]
    terminal_log_stat: float
    truncated_at: Optional[int] = None


def new_discrete_state(model: DiscreteAlternatives, p: MixingDistribution) -> DiscreteTestState:
    p = p if isinstance(p, MixingDistribution) else MixingDistribution(p)
    if p.k != model.k:
        raise ConfigError("mixing distribution and model disagree on K")
    return DiscreteTestState(
        log_component=np.zeros(model.k), n=0, log_weights=p.log_weights.copy()
    )


def step_discrete(state: DiscreteTestState, x: float, model: DiscreteAlternatives) -> DiscreteTestState:
    """Advance the state by one observation."""
    inc = model.loglr_matrix(np.asarray([x], dtype=float))[0]
    if not np.all(np.isfinite(inc)):
        raise ConfigError(f"non-finite log-likelihood increment at x={x!r}")
    return replace(state, log_component=state.log_component + inc, n=state.n + 1)


def _check_run_args(log_threshold: float, max_n: int) -> None:
    if not log_threshold > 0.0:
        raise ConfigError("log_threshold must be positive (A > 1)")
    if max_n < 1:
        raise ConfigError("max_n must be at least 1")


def default_step_cap(log_threshold: float, min_drift: float) -> int:
    """Step cap 20 * log A / (smallest positive drift), plus flat headroom.

    The proportional part alone is too tight when log A is only a few
    multiples of the per-step fluctuation scale (hitting-time tails are
    exponential in steps, not in multiples of the mean), so a constant
    1000 steps is added; truncation then indicates misconfiguration
    rather than bad luck at any threshold.
    """
    if not min_drift > 0.0:
        raise ConfigError("need a positive drift to bound the horizon")
    return math.ceil(20.0 * log_threshold / min_drift) + 1000


def _default_cap_discrete(model, p: MixingDistribution, log_threshold: float) -> int:
    info = kl_numbers(model).info
    return default_step_cap(log_threshold, float(info[p.support].min()))


def run_discrete(
    model: DiscreteAlternatives,
    p,
    log_threshold: float,
    stream: Iterable[float],
    max_n: Optional[int] = None,
) -> StopReport:
    """Run the discrete mixture rule until the log statistic reaches log_threshold.

    Stops at the first n >= 1 with Z_n >= log_threshold and reports the
    overshoot Z_n - log_threshold; if the cap is reached first the
    report says so instead of raising (campaigns treat truncation as an
    outcome).  A stream that ends earlier raises StreamExhaustedError.
    """
    p = p if isinstance(p, MixingDistribution) else MixingDistribution(p)
    if max_n is None:
        max_n = _default_cap_discrete(model, p, log_threshold)
    _check_run_args(log_threshold, max_n)
    state = new_discrete_state(model, p)
    z = state.log_statistic
    for x in stream:
        state = step_discrete(state, x, model)
        z = state.log_statistic
        if z >= log_threshold:
            return StopReport(
                stopped=True, n=state.n, overshoot=z - log_threshold, terminal_log_stat=z
            )
        if state.n >= max_n:
            return StopReport(
                stopped=False, n=None, overshoot=None, terminal_log_stat=z, truncated_at=max_n
            )
    raise StreamExhaustedError(
        f"stream ended after {state.n} observations, before stopping or the cap {max_n}"
    )


def run_sprt(
    model: DiscreteAlternatives,
    i: int,
    log_threshold: float,
    stream: Iterable[float],
    max_n: Optional[int] = None,
) -> StopReport:
    """One-sided test of the single alternative i (a degenerate mixture)."""
    i = model._check_index(i)
    w = np.zeros(model.k)
    w[i] = 1.0
    return run_discrete(model, MixingDistribution(w), log_threshold, stream, max_n)


def continuous_log_statistic(
    family: ExpFamilyModel, density: MixingDensity, running_sum: float, n: int
) -> float:
    """Quadrature log statistic log sum_m w_m g_m exp(theta_m * S - n * psi_m)."""
    th = density.grid
    log_terms = (
        np.log(density.quadrature_weights * density.values, where=density.values > 0.0,
               out=np.full(th.shape, -np.inf))
        + th * running_sum
        - n * np.asarray(family.psi(th), dtype=float)
    )
    if not np.any(np.isfinite(log_terms)):
        raise QuadratureUnderflowError(
            "mixture statistic underflowed at every quadrature node"
        )
    return float(logsumexp(log_terms))


def run_continuous(
    family: ExpFamilyModel,
    g: MixingDensity,
    log_threshold: float,
    stream: Iterable[float],
    max_n: Optional[int] = None,
) -> StopReport:
    """Run the continuous (grid-quadrature) mixture rule on a stream.

    The quadrature grid is fixed for the whole run; the sufficient
    statistic is (sum of observations, n).
    """
    if max_n is None:
        info = np.array([family.kl_null(t) for t in g.grid])
        if np.any(info <= 0.0):
            raise ConfigError("grid contains a parameter with I_theta <= 0")
        max_n = default_step_cap(log_threshold, float(info.min()))
    _check_run_args(log_threshold, max_n)
    state = ContinuousTestState(running_sum=0.0, n=0, density=g)
    z = continuous_log_statistic(family, g, state.running_sum, state.n)
    for x in stream:
        state = ContinuousTestState(
            running_sum=state.running_sum + float(x), n=state.n + 1, density=g
        )
        z = continuous_log_statistic(family, g, state.running_sum, state.n)
        if z >= log_threshold:
            return StopReport(
                stopped=True, n=state.n, overshoot=z - log_threshold, terminal_log_stat=z
            )
        if state.n >= max_n:
            return StopReport(
                stopped=False, n=None, overshoot=None, terminal_log_stat=z, truncated_at=max_n
            )
    raise StreamExhaustedError(
        f"stream ended after {state.n} observations, before stopping or the cap {max_n}"
    )
