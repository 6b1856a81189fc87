"""Statistical settings for one-sided sequential testing.

A model is a simple null distribution F_0 plus K simple alternatives
F_0..F_{K-1} (0-based indices throughout).  Each model exposes
log-likelihood-ratio increments, samplers that take an explicit random
generator, and the Kullback-Leibler geometry used by the mixing design.
Observations are scalar reals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, NonUniqueClosestIndexError

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class KLMatrix:
    """Kullback-Leibler numbers of a discrete-alternatives model.

    ``info[i]`` is the divergence of F_i versus F_0 and ``cross[j, i]``
    the divergence of F_j versus F_i (zero diagonal).  Standard errors
    are zero for closed-form models.
    """

    info: Array
    cross: Array
    stderr_info: Optional[Array] = None
    stderr_cross: Optional[Array] = None

    def __post_init__(self):
        info = np.atleast_1d(np.asarray(self.info, dtype=float))
        cross = np.asarray(self.cross, dtype=float)
        object.__setattr__(self, "info", info)
        object.__setattr__(self, "cross", cross)
        k = info.shape[0]
        if cross.shape != (k, k):
            raise ConfigError(f"cross must be {k}x{k}, got {cross.shape}")
        if not np.all(np.isfinite(info)) or not np.all(np.isfinite(cross)):
            raise ConfigError("non-finite KL number; model is misconfigured")
        if np.any(info <= 0.0):
            raise ConfigError("every I_i must be strictly positive")
        if np.any(np.diag(cross) != 0.0):
            raise ConfigError("cross KL diagonal must be exactly zero")
        if np.any(cross < 0.0):
            raise ConfigError("cross KL numbers must be nonnegative")

    @property
    def k(self) -> int:
        return self.info.shape[0]


class DiscreteAlternatives:
    """Base class: simple null versus K simple alternatives.

    Subclasses provide ``loglr``, the samplers, and (when available)
    closed-form KL numbers.  Instances are immutable after construction
    and safe to share across workers; all sampling goes through an
    explicit ``numpy.random.Generator``.
    """

    #: True when the log-likelihood-ratio increments live on a lattice.
    arithmetic: bool = False

    @property
    def k(self) -> int:
        raise NotImplementedError

    def loglr(self, i: int, x):
        """log(dF_i/dF_0)(x); vectorized over x."""
        raise NotImplementedError

    def loglr_matrix(self, x: Array) -> Array:
        """All K increments for a batch of observations, shape (len(x), K)."""
        x = np.asarray(x, dtype=float)
        return np.column_stack([self.loglr(i, x) for i in range(self.k)])

    def sample_null(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_alt(self, i: int, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_alt_rows(self, rng: np.random.Generator, idx: Array, ncols: int) -> Array:
        """Matrix of observations with row r drawn iid from F_{idx[r]}.

        Deterministic function of (rng state, idx).  The default draws
        the rows grouped by index, in ascending index order.
        """
        idx = np.asarray(idx)
        out = np.empty((idx.shape[0], ncols), dtype=float)
        for i in np.unique(idx):
            rows = np.nonzero(idx == i)[0]
            out[rows] = self.sample_alt(int(i), rng, size=(rows.size, ncols))
        return out

    def closed_form_kl(self) -> Optional[KLMatrix]:
        """KL numbers when the model knows them exactly, else None."""
        return None

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.k:
            raise IndexError(f"alternative index {i} out of range [0, {self.k})")
        return i


@dataclass(frozen=True, eq=False)
class GaussianMeanModel(DiscreteAlternatives):
    """Unit-variance Gaussian observations; mean 0 under the null, mu_i under F_i."""

    means: tuple

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if len(means) == 0:
            raise ConfigError("need at least one alternative mean")
        if any(not math.isfinite(m) or m == 0.0 for m in means):
            raise ConfigError("means must be finite and nonzero")
        if len(set(means)) != len(means):
            raise ConfigError("means must be distinct")

    @cached_property
    def mu(self) -> Array:
        return np.asarray(self.means, dtype=float)

    @property
    def k(self) -> int:
        return len(self.means)

    def loglr(self, i: int, x):
        i = self._check_index(i)
        m = self.means[i]
        return m * np.asarray(x, dtype=float) - 0.5 * m * m

    def loglr_matrix(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return np.outer(x, self.mu) - 0.5 * self.mu * self.mu

    def sample_null(self, rng, size=None):
        return rng.normal(0.0, 1.0, size)

    def sample_alt(self, i, rng, size=None):
        i = self._check_index(i)
        return rng.normal(self.means[i], 1.0, size)

    def sample_alt_rows(self, rng, idx, ncols):
        idx = np.asarray(idx)
        return rng.standard_normal((idx.shape[0], ncols)) + self.mu[idx][:, None]

    def closed_form_kl(self) -> KLMatrix:
        diff = self.mu[:, None] - self.mu[None, :]
        return KLMatrix(info=0.5 * self.mu**2, cross=0.5 * diff**2)


@dataclass(frozen=True, eq=False)
class ExpFamilyModel:
    """One-parameter exponential family dF_theta/dF_0 = exp(theta*x - psi(theta)).

    ``psi`` is the log moment generating function of X_1 under F_0,
    ``psi1``/``psi2`` its first two derivatives, and ``theta_domain`` the
    open interval where psi is finite.  ``sample_rows(rng, thetas, n)``
    is an optional vectorized sampler (row r iid from P_{thetas[r]}).
    """

    psi: Callable
    psi1: Callable
    psi2: Callable
    theta_domain: tuple
    sample: Callable
    sample_null: Callable
    sample_rows: Optional[Callable] = None
    name: str = "exp-family"

    def contains(self, theta: float) -> bool:
        lo, hi = self.theta_domain
        return lo < theta < hi

    def require(self, theta: float) -> float:
        theta = float(theta)
        if not self.contains(theta):
            raise ConfigError(
                f"theta={theta} outside the natural parameter domain {self.theta_domain}"
            )
        return theta

    def loglr(self, theta: float, x):
        theta = self.require(theta)
        return theta * np.asarray(x, dtype=float) - self.psi(theta)

    def kl_null(self, theta: float) -> float:
        """I_theta = theta*psi'(theta) - psi(theta), the divergence from F_0."""
        theta = self.require(theta)
        return theta * self.psi1(theta) - self.psi(theta)

    def fisher(self, theta: float) -> float:
        return self.psi2(self.require(theta))

    def to_alternatives(self, thetas: Sequence[float]) -> "ExpFamilyAlternatives":
        return ExpFamilyAlternatives(family=self, thetas=tuple(float(t) for t in thetas))


def cross_kl_exp_family(family: ExpFamilyModel, theta: float, theta_star: float) -> float:
    """KL divergence of P_theta versus P_theta_star within the family."""
    theta = family.require(theta)
    theta_star = family.require(theta_star)
    return (theta - theta_star) * family.psi1(theta) - (family.psi(theta) - family.psi(theta_star))


@dataclass(frozen=True, eq=False)
class ExpFamilyAlternatives(DiscreteAlternatives):
    """A finite set of parameter points of an exponential family, as alternatives."""

    family: ExpFamilyModel
    thetas: tuple

    def __post_init__(self):
        thetas = tuple(self.family.require(t) for t in self.thetas)
        object.__setattr__(self, "thetas", thetas)
        if len(thetas) == 0:
            raise ConfigError("need at least one parameter point")
        if len(set(thetas)) != len(thetas):
            raise ConfigError("parameter points must be distinct")
        if any(t == 0.0 for t in thetas):
            raise ConfigError("theta=0 coincides with the null")

    @cached_property
    def th(self) -> Array:
        return np.asarray(self.thetas, dtype=float)

    @cached_property
    def _psis(self) -> Array:
        return np.asarray([self.family.psi(t) for t in self.thetas], dtype=float)

    @property
    def k(self) -> int:
        return len(self.thetas)

    def loglr(self, i, x):
        i = self._check_index(i)
        return self.thetas[i] * np.asarray(x, dtype=float) - self._psis[i]

    def loglr_matrix(self, x):
        x = np.asarray(x, dtype=float)
        return np.outer(x, self.th) - self._psis

    def sample_null(self, rng, size=None):
        return self.family.sample_null(rng, size)

    def sample_alt(self, i, rng, size=None):
        i = self._check_index(i)
        return self.family.sample(self.thetas[i], rng, size)

    def sample_alt_rows(self, rng, idx, ncols):
        if self.family.sample_rows is None:
            return super().sample_alt_rows(rng, idx, ncols)
        idx = np.asarray(idx)
        return self.family.sample_rows(rng, self.th[idx], ncols)

    def closed_form_kl(self) -> KLMatrix:
        info = np.array([self.family.kl_null(t) for t in self.thetas])
        k = self.k
        cross = np.zeros((k, k))
        for j in range(k):
            for i in range(k):
                if i != j:
                    cross[j, i] = cross_kl_exp_family(self.family, self.thetas[j], self.thetas[i])
        return KLMatrix(info=info, cross=cross)


# --- concrete families ------------------------------------------------------

def _gauss_psi(t):
    return 0.5 * np.asarray(t, dtype=float) ** 2


def _gauss_psi1(t):
    return np.asarray(t, dtype=float)


def _gauss_psi2(t):
    return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0


def _gauss_sample(theta, rng, size=None):
    return rng.normal(theta, 1.0, size)


def _gauss_sample_null(rng, size=None):
    return rng.normal(0.0, 1.0, size)


def _gauss_sample_rows(rng, thetas, ncols):
    return rng.standard_normal((len(thetas), ncols)) + thetas[:, None]


def gaussian_shift_family() -> ExpFamilyModel:
    """N(theta, 1) observations; psi(theta) = theta^2/2 on all of R."""
    return ExpFamilyModel(
        psi=_gauss_psi,
        psi1=_gauss_psi1,
        psi2=_gauss_psi2,
        theta_domain=(-math.inf, math.inf),
        sample=_gauss_sample,
        sample_null=_gauss_sample_null,
        sample_rows=_gauss_sample_rows,
        name="gaussian-shift",
    )


def _exprate_psi(t):
    return -np.log1p(-np.asarray(t, dtype=float))


def _exprate_psi1(t):
    return 1.0 / (1.0 - np.asarray(t, dtype=float))


def _exprate_psi2(t):
    return 1.0 / (1.0 - np.asarray(t, dtype=float)) ** 2


def _exprate_sample(theta, rng, size=None):
    return rng.exponential(1.0 / (1.0 - theta), size)


def _exprate_sample_null(rng, size=None):
    return rng.exponential(1.0, size)


def _exprate_sample_rows(rng, thetas, ncols):
    return rng.standard_exponential((len(thetas), ncols)) / (1.0 - thetas)[:, None]


def exponential_rate_family() -> ExpFamilyModel:
    """Exponential observations: rate 1 under the null, rate 1-theta under P_theta.

    psi(theta) = -log(1-theta) on theta < 1; densities are normalized, so
    dF_theta(x) = (1-theta) exp(-(1-theta) x) dx.
    """
    return ExpFamilyModel(
        psi=_exprate_psi,
        psi1=_exprate_psi1,
        psi2=_exprate_psi2,
        theta_domain=(-math.inf, 1.0),
        sample=_exprate_sample,
        sample_null=_exprate_sample_null,
        sample_rows=_exprate_sample_rows,
        name="exp-exponential",
    )


# --- module-level operations ------------------------------------------------

def loglr_increment(model: DiscreteAlternatives, i: int, x):
    """log(dF_i/dF_0)(x) for alternative i of a discrete model."""
    model._check_index(i)
    return model.loglr(i, x)


def kl_numbers(model: DiscreteAlternatives, reps: int = 200_000, seed: int = 0) -> KLMatrix:
    """KL numbers of a model: closed form when available, else Monte Carlo.

    The Monte Carlo fallback reports standard errors; estimates of cross
    divergences that come out slightly negative (within noise) are
    clamped to zero, anything clearly negative raises.
    """
    closed = model.closed_form_kl()
    if closed is not None:
        return closed

    k = model.k
    info = np.zeros(k)
    cross = np.zeros((k, k))
    se_info = np.zeros(k)
    se_cross = np.zeros((k, k))
    for j in range(k):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(4, j)))
        x = np.asarray(model.sample_alt(j, rng, size=reps), dtype=float)
        z = model.loglr_matrix(x)
        if not np.all(np.isfinite(z)):
            raise ConfigError("non-finite log-likelihood ratio; model is misconfigured")
        means = z.mean(axis=0)
        stderrs = z.std(axis=0, ddof=1) / math.sqrt(reps)
        info[j] = means[j]
        se_info[j] = stderrs[j]
        d = z[:, j][:, None] - z
        cross[j] = d.mean(axis=0)
        se_cross[j] = d.std(axis=0, ddof=1) / math.sqrt(reps)
    cross[np.arange(k), np.arange(k)] = 0.0
    bad = cross < -3.0 * se_cross
    if np.any(bad):
        raise ConfigError("estimated cross KL significantly negative; model is misconfigured")
    np.clip(cross, 0.0, None, out=cross)
    return KLMatrix(info=info, cross=cross, stderr_info=se_info, stderr_cross=se_cross)


def closest_active_index(klm: KLMatrix, p, i: int, rtol: float = 1e-9) -> int:
    """Index of the active alternative KL-closest to alternative i.

    Active means positive mixing weight.  If p_i > 0 the answer is i
    itself.  A tie among minimizers (within relative tolerance ``rtol``)
    raises NonUniqueClosestIndexError rather than picking arbitrarily.
    """
    weights = np.asarray(getattr(p, "weights", p), dtype=float)
    if weights.shape[0] != klm.k:
        raise ConfigError("mixing weights and KL matrix disagree on K")
    i = int(i)
    if not 0 <= i < klm.k:
        raise IndexError(f"alternative index {i} out of range [0, {klm.k})")
    support = np.nonzero(weights > 0.0)[0]
    if support.size == 0:
        raise ConfigError("mixing distribution has empty support")
    if weights[i] > 0.0:
        return i
    dists = klm.cross[i, support]
    order = np.argsort(dists, kind="stable")
    best = dists[order[0]]
    if order.size > 1:
        runner_up = dists[order[1]]
        if runner_up - best <= rtol * max(1.0, abs(best)):
            raise NonUniqueClosestIndexError(
                f"alternatives {support[order[0]]} and {support[order[1]]} are "
                f"KL-equidistant from alternative {i}"
            )
    return int(support[order[0]])
