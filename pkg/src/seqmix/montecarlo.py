"""Monte Carlo estimation of operating characteristics.

The error probability is estimated by importance sampling: replications
are simulated only under the alternatives (index drawn from the mixing
distribution), where the rule stops almost surely, and reweighted by
exp(-Z_T).  Every replication's contribution is then bounded by 1/A, so
very small error probabilities need no rare-event luck.

Replications are processed in fixed-size chunks whose random streams
depend only on (seed, role, chunk, block); estimates are therefore
bit-identical for any worker count or partitioning (the per-chunk
summaries are folded in chunk order).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from . import _rng
from ._math import logsumexp
from .engine import default_step_cap
from .errors import ConfigError, ConvergenceError, NonPositiveDriftError
from .mixing import MixingDistribution, PerformanceReport
from .models import DiscreteAlternatives, closest_active_index, kl_numbers

Array = np.ndarray


@dataclass(frozen=True)
class SimConfig:
    """Replication count, master seed, and optional caps for one campaign."""

    reps: int
    seed: int = 0
    max_n: Optional[int] = None
    alpha: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if int(self.reps) < 1:
            raise ConfigError("reps must be at least 1")
        _rng.check_seed(self.seed)
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.max_n is not None and int(self.max_n) < 1:
            raise ConfigError("max_n must be at least 1")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate with its standard error.

    ``reps`` is the total replication count; ``truncated`` of them hit
    the step cap.  For estimators that exclude truncated replications
    the mean and standard error are over the remaining reps - truncated.
    """

    mean: float
    stderr: float
    reps: int
    truncated: int

    def __post_init__(self):
        if self.truncated > self.reps:
            raise ConfigError("truncated count cannot exceed reps")


# --- chunk kernel -------------------------------------------------------------


def _chunk_alt_indices(support: Array, cum_weights: Array, seed: int, chunk: int) -> Array:
    """Alternative index for every row of a chunk, drawn from the mixing
    distribution (stream block 0 of the chunk)."""
    rng = _rng.block_rng(seed, _rng.ROLE_ERRPROB, 0, chunk, 0)
    u = rng.random(_rng.CHUNK)
    pos = np.searchsorted(cum_weights, u, side="right")
    return support[pos]


def _chunk_obs(model, idx_full: Array, seed: int, role: int, ctx: int, chunk: int, block: int) -> Array:
    """Observation block (CHUNK x BLOCK); row r iid from F_{idx_full[r]}."""
    rng = _rng.block_rng(seed, role, ctx, chunk, block)
    return model.sample_alt_rows(rng, idx_full, _rng.BLOCK)


def _simulate_chunk(
    chunk: int,
    model: DiscreteAlternatives,
    support: Array,
    logw_support: Array,
    cum_weights: Optional[Array],
    alt_index: Optional[int],
    log_threshold: float,
    max_n: int,
    seed: int,
    role: int,
    ctx: int,
    reps: int,
):
    """Run one chunk of replications of the mixture rule.

    Returns (rows, n_stop, z_term, stopped) for the first ``rows``
    replications of the chunk; z_term is the terminal log statistic
    (at stopping, or at the cap for truncated rows).
    """
    rows = min(_rng.CHUNK, reps - chunk * _rng.CHUNK)
    if alt_index is None:
        idx_full = _chunk_alt_indices(support, cum_weights, seed, chunk)
    else:
        idx_full = np.full(_rng.CHUNK, alt_index, dtype=np.int64)

    z_comp = np.zeros((_rng.CHUNK, support.size))
    n_stop = np.zeros(_rng.CHUNK, dtype=np.int64)
    z_term = np.zeros(_rng.CHUNK)
    stopped = np.zeros(_rng.CHUNK, dtype=bool)
    active = np.arange(rows)
    t = 0
    block = 0
    while active.size and t < max_n:
        block += 1
        obs = _chunk_obs(model, idx_full, seed, role, ctx, chunk, block)
        for col in range(_rng.BLOCK):
            t += 1
            inc = model.loglr_matrix(obs[active, col])[:, support]
            z_comp[active] += inc
            stat = logsumexp(z_comp[active] + logw_support, axis=1)
            stat = np.atleast_1d(stat)
            hit = stat >= log_threshold
            done = active[hit]
            n_stop[done] = t
            z_term[done] = stat[hit]
            stopped[done] = True
            if t >= max_n:
                left = active[~hit]
                z_term[left] = stat[~hit]  # statistic at the cap, for reporting
                n_stop[left] = t
                active = left[:0]
                break
            active = active[~hit]
            if not active.size:
                break
    return rows, n_stop[:rows], z_term[:rows], stopped[:rows]


def _moments(values: Array):
    n = values.size
    if n == 0:
        return 0, 0.0, 0.0
    mean = float(values.mean())
    m2 = float(((values - mean) ** 2).sum())
    return n, mean, m2


def _merge_moments(a, b):
    na, ma, m2a = a
    nb, mb, m2b = b
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    d = mb - ma
    return n, ma + d * nb / n, m2a + m2b + d * d * na * nb / n


def _fold_chunks(task, n_chunks: int, workers: int):
    """Evaluate task(chunk) for every chunk and return results in chunk order."""
    if workers <= 1 or n_chunks <= 1:
        return [task(c) for c in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=min(workers, n_chunks)) as ex:
        return list(ex.map(task, range(n_chunks)))


def _stderr(n: int, m2: float) -> float:
    if n < 2:
        return 0.0
    return math.sqrt(m2 / (n - 1) / n)


def _ess_drift(klm, p: MixingDistribution, i: int) -> float:
    """Drift of the tracked walk under P_i; must be positive for the rule to stop."""
    if p.weights[i] > 0.0:
        return float(klm.info[i])
    i_star = closest_active_index(klm, p, i)
    drift = float(klm.info[i] - klm.cross[i, i_star])
    if drift <= 0.0:
        raise NonPositiveDriftError(
            f"I_{i} - I_({i},{i_star}) = {drift:g} <= 0; the mixture rule may never "
            f"stop under P_{i}"
        )
    return drift


def estimate_error_probability(
    model: DiscreteAlternatives, p, log_threshold: float, cfg: SimConfig
) -> Estimate:
    """Importance-sampling estimate of the error probability P_0(T_A < infinity).

    Each replication draws an alternative from the mixing distribution,
    runs the rule under it, and contributes exp(-Z_T) <= 1/A.  Truncated
    replications contribute exp(-Z) at the cap and are flagged: that
    contribution is not a guaranteed bound on their true share, so a
    nonzero truncated count means the estimate needs a larger cap.
    """
    p = p if isinstance(p, MixingDistribution) else MixingDistribution(p)
    if p.k != model.k:
        raise ConfigError("mixing distribution and model disagree on K")
    if not log_threshold > 0.0:
        raise ConfigError("log_threshold must be positive (A > 1)")
    klm = kl_numbers(model)
    max_n = cfg.max_n or default_step_cap(log_threshold, float(klm.info[p.support].min()))
    support = p.support
    cum = np.cumsum(p.weights[support])
    cum[-1] = 1.0
    task = partial(
        _simulate_chunk,
        model=model,
        support=support,
        logw_support=p.log_weights[support],
        cum_weights=cum,
        alt_index=None,
        log_threshold=float(log_threshold),
        max_n=int(max_n),
        seed=cfg.seed,
        role=_rng.ROLE_ERRPROB,
        ctx=0,
        reps=int(cfg.reps),
    )
    total = (0, 0.0, 0.0)
    truncated = 0
    for rows, _, z_term, stopped in _fold_chunks(task, _rng.n_chunks(cfg.reps), cfg.workers):
        truncated += int(rows - stopped.sum())
        total = _merge_moments(total, _moments(np.exp(-z_term)))
    if truncated:
        warnings.warn(
            f"{truncated} of {cfg.reps} replications hit the step cap {max_n}; "
            "the error-probability estimate is unreliable",
            stacklevel=2,
        )
    n, mean, m2 = total
    return Estimate(mean=mean, stderr=_stderr(n, m2), reps=int(cfg.reps), truncated=truncated)


def estimate_ess(
    model: DiscreteAlternatives, p, log_threshold: float, i: int, cfg: SimConfig
) -> Estimate:
    """Mean stopping step of the mixture rule under P_i.

    Works for zero-weight i too, provided the drift I_i - I_{i i*} is
    positive.  Truncated replications are excluded from the mean and
    counted; more than one per thousand flags the run.
    """
    p = p if isinstance(p, MixingDistribution) else MixingDistribution(p)
    if p.k != model.k:
        raise ConfigError("mixing distribution and model disagree on K")
    if not log_threshold > 0.0:
        raise ConfigError("log_threshold must be positive (A > 1)")
    i = model._check_index(i)
    klm = kl_numbers(model)
    drift = _ess_drift(klm, p, i)
    max_n = cfg.max_n or default_step_cap(log_threshold, drift)
    support = p.support
    task = partial(
        _simulate_chunk,
        model=model,
        support=support,
        logw_support=p.log_weights[support],
        cum_weights=None,
        alt_index=i,
        log_threshold=float(log_threshold),
        max_n=int(max_n),
        seed=cfg.seed,
        role=_rng.ROLE_ESS,
        ctx=i,
        reps=int(cfg.reps),
    )
    total = (0, 0.0, 0.0)
    truncated = 0
    for rows, n_stop, _, stopped in _fold_chunks(task, _rng.n_chunks(cfg.reps), cfg.workers):
        truncated += int(rows - stopped.sum())
        total = _merge_moments(total, _moments(n_stop[stopped].astype(float)))
    if truncated == cfg.reps:
        raise ConvergenceError(f"all replications hit the step cap {max_n}")
    if truncated > 1e-3 * cfg.reps:
        warnings.warn(
            f"{truncated} of {cfg.reps} replications hit the step cap {max_n} and were "
            "excluded from the mean",
            stacklevel=2,
        )
    n, mean, m2 = total
    return Estimate(mean=mean, stderr=_stderr(n, m2), reps=int(cfg.reps), truncated=truncated)


@dataclass(frozen=True, eq=False)
class MaxKLEstimate:
    """max_i I_i * ESS_i with its per-alternative breakdown."""

    value: float
    stderr: float
    argmax: int
    info: Array
    per_alternative: tuple  # Estimate per alternative (raw stopping steps)

    @property
    def kl_per_alternative(self) -> Array:
        return np.array(
            [self.info[i] * est.mean for i, est in enumerate(self.per_alternative)]
        )


def estimate_max_kl(model: DiscreteAlternatives, p, log_threshold: float, cfg: SimConfig) -> MaxKLEstimate:
    """Maximal expected Kullback-Leibler information max_i I_i * E_i[T_A].

    Estimates the expected sample size under every alternative and
    scales by the KL numbers; the standard error is propagated from the
    alternative attaining the maximum.
    """
    klm = kl_numbers(model)
    per = tuple(estimate_ess(model, p, log_threshold, i, cfg) for i in range(model.k))
    values = np.array([klm.info[i] * est.mean for i, est in enumerate(per)])
    argmax = int(np.argmax(values))
    return MaxKLEstimate(
        value=float(values[argmax]),
        stderr=float(klm.info[argmax] * per[argmax].stderr),
        argmax=argmax,
        info=np.asarray(klm.info, dtype=float),
        per_alternative=per,
    )


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    mc_mean: float
    mc_stderr: float
    approx_value: float
    diff: float
    diff_in_stderr: float


def compare_to_asymptotics(mc: MaxKLEstimate, approx: PerformanceReport) -> list:
    """Per-quantity comparison of Monte Carlo results with the asymptotic formulas."""
    if len(mc.per_alternative) != approx.k:
        raise ConfigError("Monte Carlo results and formula report disagree on K")

    def row(name, mean, stderr, target):
        d = mean - target
        if stderr > 0.0:
            rel = d / stderr
        else:
            rel = 0.0 if d == 0.0 else math.copysign(math.inf, d)
        return ComparisonRow(name, mean, stderr, target, d, rel)

    rows = []
    for i, est in enumerate(mc.per_alternative):
        rows.append(
            row(
                f"kl_info[{i}]",
                float(mc.info[i] * est.mean),
                float(mc.info[i] * est.stderr),
                float(approx.per_alternative[i]),
            )
        )
    rows.append(row("max_kl_info", mc.value, mc.stderr, approx.max_approx))
    rows.append(row("vs_lower_bound", mc.value, mc.stderr, approx.lower_bound))
    return rows


# --- replay helpers (single source of truth for per-replication streams) ------


def replication_alt_index(p: MixingDistribution, seed: int, rep: int) -> int:
    """The alternative an error-probability replication samples under."""
    support = p.support
    cum = np.cumsum(p.weights[support])
    cum[-1] = 1.0
    idx = _chunk_alt_indices(support, cum, seed, rep // _rng.CHUNK)
    return int(idx[rep % _rng.CHUNK])


def replication_stream(
    model: DiscreteAlternatives,
    idx_full_value: int,
    seed: int,
    role: int,
    ctx: int,
    rep: int,
    n_obs: int,
    p: Optional[MixingDistribution] = None,
) -> Array:
    """Materialize the first n_obs observations of replication ``rep``.

    Reconstructs exactly the stream the chunk kernel feeds that
    replication, so engine runs can replay Monte Carlo replications
    observation for observation.
    """
    chunk = rep // _rng.CHUNK
    row = rep % _rng.CHUNK
    if p is not None:
        support = p.support
        cum = np.cumsum(p.weights[support])
        cum[-1] = 1.0
        idx_full = _chunk_alt_indices(support, cum, seed, chunk)
    else:
        idx_full = np.full(_rng.CHUNK, idx_full_value, dtype=np.int64)
    blocks = []
    for b in range(1, (n_obs + _rng.BLOCK - 1) // _rng.BLOCK + 1):
        blocks.append(_chunk_obs(model, idx_full, seed, role, ctx, chunk, b)[row])
    return np.concatenate(blocks)[:n_obs]
