"""Mixing distributions and asymptotic performance formulas.

Discrete mixtures are probability vectors over the K alternatives;
continuous mixtures are densities on a parameter interval represented on
an explicit quadrature grid.  All performance quantities are in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._math import logsumexp
from .errors import ConfigError, NonPositiveDriftError
from .models import ExpFamilyModel, KLMatrix, closest_active_index

Array = np.ndarray

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """Probability vector over the K alternatives (weights sum to 1)."""

    weights: Array

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ConfigError("weights must be finite and nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1 (got {w.sum()!r})")
        if not np.any(w > 0.0):
            raise ConfigError("at least one weight must be positive")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def support(self) -> Array:
        return np.nonzero(self.weights > 0.0)[0]

    @property
    def fully_supported(self) -> bool:
        return bool(np.all(self.weights > 0.0))

    @property
    def log_weights(self) -> Array:
        w = self.weights
        return np.where(w > 0.0, np.log(np.where(w > 0.0, w, 1.0)), -np.inf)


def _as_weights(p) -> Array:
    if isinstance(p, MixingDistribution):
        return p.weights
    return MixingDistribution(np.asarray(p, dtype=float)).weights


def optimal_mixing(kappas) -> MixingDistribution:
    """The equalizing mixing distribution p0_i proportional to exp(kappa_i).

    Computed with max-shifted exponentials, so any common shift of the
    kappas leaves the result unchanged.
    """
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    if not np.all(np.isfinite(kap)):
        raise ConfigError("kappas must be finite")
    e = np.exp(kap - kap.max())
    return MixingDistribution(e / e.sum())


_NAMED_KINDS = ("uniform", "kl", "inv_delta", "expk_over_delta")


def named_mixing(kind: str, info=None, deltas=None, kappas=None) -> MixingDistribution:
    """Reference mixing distributions: uniform, I-proportional, 1/delta, e^kappa/delta.

    ``info`` (the KL numbers I_i) is always required since it fixes K;
    the other vectors only for the kinds that use them.
    """
    if kind not in _NAMED_KINDS:
        raise ConfigError(f"unknown mixing kind {kind!r}; expected one of {_NAMED_KINDS}")
    info = np.atleast_1d(np.asarray(info, dtype=float))
    k = info.shape[0]
    if kind == "uniform":
        return MixingDistribution(np.full(k, 1.0 / k))
    if kind == "kl":
        if np.any(info <= 0.0) or not np.all(np.isfinite(info)):
            raise ConfigError("KL numbers must be positive and finite")
        return MixingDistribution(info / info.sum())
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.shape[0] != k or np.any(deltas <= 0.0):
        raise ConfigError("deltas must be positive, one per alternative")
    if kind == "inv_delta":
        w = 1.0 / deltas
        return MixingDistribution(w / w.sum())
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    if kappas.shape[0] != k or not np.all(np.isfinite(kappas)):
        raise ConfigError("kappas must be finite, one per alternative")
    w = np.exp(kappas - kappas.max()) / deltas
    return MixingDistribution(w / w.sum())


def threshold_for_alpha(p, deltas, alpha: float) -> float:
    """Threshold A = (sum_i p_i delta_i) / alpha.

    With this choice the rule's error probability is alpha(1 + o(1)) as
    alpha tends to 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    w = _as_weights(p)
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.shape[0] != w.shape[0]:
        raise ConfigError("deltas and weights disagree on K")
    return float(w @ deltas) / alpha


def ess_approx_discrete(
    i: int,
    p,
    alpha: float,
    kappas,
    deltas,
    kl: Optional[KLMatrix] = None,
    kappa_cross: Optional[float] = None,
) -> float:
    """Asymptotic approximation of (I_i - I_{i i*}) * E_i[T], in nats.

    For an alternative with positive weight this is
    |log alpha| + log(sum_j p_j delta_j) + kappa_i - log p_i.
    For a zero-weight alternative the closest active index i* takes
    over: the caller must supply the KL matrix (to locate i* and check
    the positive drift I_i - I_{i i*}) and the cross overshoot mean
    kappa_{i|i*}, for which no closed form exists.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    w = _as_weights(p)
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    dl = np.atleast_1d(np.asarray(deltas, dtype=float))
    i = int(i)
    if not 0 <= i < w.shape[0]:
        raise IndexError(f"alternative index {i} out of range")
    base = -math.log(alpha) + math.log(float(w @ dl))
    if w[i] > 0.0:
        return base + float(kap[i]) - math.log(w[i])
    if kl is None:
        raise ConfigError("p_i = 0: the KL matrix is required to locate i*")
    i_star = closest_active_index(kl, w, i)
    drift = float(kl.info[i] - kl.cross[i, i_star])
    if drift <= 0.0:
        raise NonPositiveDriftError(
            f"I_{i} - I_({i},{i_star}) = {drift:g} <= 0; the rule may never stop under P_{i}"
        )
    if kappa_cross is None:
        raise ConfigError("p_i = 0: kappa_cross (the mean overshoot kappa_{i|i*}) is required")
    return base + float(kappa_cross) - math.log(w[i_star])


def _require_full_support(w: Array) -> None:
    if np.any(w <= 0.0):
        raise ConfigError("this quantity requires a fully supported mixing distribution")


def max_kl_approx(p, alpha: float, kappas, deltas) -> float:
    """Asymptotic approximation of max_i I_i*E_i[T]:
    |log alpha| + log[(sum_j p_j delta_j) * max_i e^{kappa_i}/p_i]."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    w = _as_weights(p)
    _require_full_support(w)
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    dl = np.atleast_1d(np.asarray(deltas, dtype=float))
    return -math.log(alpha) + math.log(float(w @ dl)) + float(np.max(kap - np.log(w)))


def minimax_lower_bound(alpha: float, kappas, deltas) -> float:
    """The asymptotic minimax value |log alpha| + log(sum_i delta_i e^{kappa_i})."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    dl = np.atleast_1d(np.asarray(deltas, dtype=float))
    return -math.log(alpha) + float(logsumexp(kap + np.log(dl)))


def asymptotic_loss(p, kappas, deltas) -> float:
    """Limiting minimax performance loss of the mixing distribution p.

    log[(sum_j p_j delta_j) * max_i(e^{kappa_i}/p_i) / sum_j delta_j e^{kappa_j}];
    zero exactly at the optimal mixing.
    """
    w = _as_weights(p)
    _require_full_support(w)
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    dl = np.atleast_1d(np.asarray(deltas, dtype=float))
    return (
        math.log(float(w @ dl))
        + float(np.max(kap - np.log(w)))
        - float(logsumexp(kap + np.log(dl)))
    )


def equalizer_defect(p, kappas) -> float:
    """Spread of kappa_i - log p_i across i; zero iff p is the optimal mixing."""
    w = _as_weights(p)
    _require_full_support(w)
    kap = np.atleast_1d(np.asarray(kappas, dtype=float))
    g = kap - np.log(w)
    return float(np.max(g) - np.min(g))


@dataclass(frozen=True, eq=False)
class PerformanceReport:
    """Formula-level performance of a mixing distribution at a given alpha."""

    alpha: float
    per_alternative: Array  # approximations of I_i * E_i[T], nats
    max_approx: float
    lower_bound: float
    loss: float

    @property
    def k(self) -> int:
        return self.per_alternative.shape[0]


def performance_report(p, alpha: float, kappas, deltas) -> PerformanceReport:
    """Evaluate the discrete asymptotic formulas for a fully supported mixing."""
    w = _as_weights(p)
    _require_full_support(w)
    per = np.array([ess_approx_discrete(i, w, alpha, kappas, deltas) for i in range(w.shape[0])])
    return PerformanceReport(
        alpha=float(alpha),
        per_alternative=per,
        max_approx=max_kl_approx(w, alpha, kappas, deltas),
        lower_bound=minimax_lower_bound(alpha, kappas, deltas),
        loss=asymptotic_loss(w, kappas, deltas),
    )


# --- continuous mixtures -----------------------------------------------------

_PANEL_ORDER = 8


def gauss_legendre_grid(lo: float, hi: float, n: int) -> tuple[Array, Array]:
    """Composite Gauss-Legendre nodes and weights on [lo, hi].

    ``n`` must be a multiple of the panel order 8; the interval is split
    into n/8 equal panels with an 8-point rule on each.
    """
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ConfigError("need a finite interval with lo < hi")
    n = int(n)
    if n < _PANEL_ORDER or n % _PANEL_ORDER != 0:
        raise ConfigError(f"grid size must be a positive multiple of {_PANEL_ORDER}")
    base_x, base_w = np.polynomial.legendre.leggauss(_PANEL_ORDER)
    panels = n // _PANEL_ORDER
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    weights = (half[:, None] * base_w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class MixingDensity:
    """A mixing density tabulated on a quadrature grid over the parameter interval.

    The quadrature-weighted sum of ``values`` is 1 (within 1e-9).  For
    the optimal density the unnormalized integral is kept in
    ``normalizer``.
    """

    grid: Array
    values: Array
    quadrature_weights: Array
    normalizer: Optional[float] = None

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.grid, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        w = np.atleast_1d(np.asarray(self.quadrature_weights, dtype=float))
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "quadrature_weights", w)
        if not (g.shape == v.shape == w.shape) or g.size < 2:
            raise ConfigError("grid, values and weights must share a length >= 2")
        if np.any(np.diff(g) <= 0.0):
            raise ConfigError("grid must be strictly increasing")
        if np.any(v < 0.0) or np.any(w <= 0.0):
            raise ConfigError("density values must be >= 0 and weights > 0")
        total = float(w @ v)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"density is not normalized: quadrature mass {total!r}")

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def integrate_against(self, f: Callable[[Array], Array]) -> float:
        """Quadrature of f(theta) against the density."""
        return float(self.quadrature_weights @ (np.asarray(f(self.grid)) * self.values))

    def value_at(self, theta: float) -> float:
        """Density value at theta: exact at nodes, linear between them.

        Values outside the node span are clamped to the nearest node and
        flagged with a warning, since the boundary lies outside the grid.
        """
        theta = float(theta)
        g = self.grid
        j = np.searchsorted(g, theta)
        if j < g.size and g[j] == theta:
            return float(self.values[j])
        if theta < g[0] or theta > g[-1]:
            warnings.warn(
                "evaluating the mixing density outside its node span (boundary region)",
                stacklevel=2,
            )
        return float(np.interp(theta, g, self.values))


def minimax_density_integrand(family: ExpFamilyModel, kappa_fn: Callable, theta: float) -> float:
    """Unnormalized optimal-density integrand e^{kappa(theta)} sqrt(psi''(theta)/I_theta)."""
    info = family.kl_null(theta)
    if info <= 0.0:
        raise ConfigError(f"I_theta vanishes at theta={theta}; the interval must avoid 0")
    return math.exp(float(kappa_fn(theta))) * math.sqrt(family.fisher(theta) / info)


def optimal_density(
    family: ExpFamilyModel,
    interval: tuple,
    grid_size: int = 128,
    kappa_fn: Callable = None,
) -> MixingDensity:
    """The nearly minimax mixing density on a closed interval bounded away from 0.

    g0(theta) is proportional to e^{kappa(theta)} sqrt(psi''(theta)/I_theta),
    normalized by the grid's quadrature rule; the unnormalized integral
    is stored as the density's ``normalizer``.  ``kappa_fn`` must be the
    (continuous) mean-overshoot function of the family.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if lo <= 0.0 <= hi:
        raise ConfigError("the parameter interval must be bounded away from 0")
    family.require(lo)
    family.require(hi)
    if kappa_fn is None:
        raise ConfigError("kappa_fn is required (no generic closed form exists)")
    nodes, weights = gauss_legendre_grid(lo, hi, grid_size)
    raw = np.array([minimax_density_integrand(family, kappa_fn, t) for t in nodes])
    normalizer = float(weights @ raw)
    return MixingDensity(
        grid=nodes, values=raw / normalizer, quadrature_weights=weights, normalizer=normalizer
    )


def uniform_density(interval: tuple, grid_size: int = 128) -> MixingDensity:
    """Constant density on the interval (a non-optimal reference mixing)."""
    lo, hi = float(interval[0]), float(interval[1])
    nodes, weights = gauss_legendre_grid(lo, hi, grid_size)
    vals = np.full(nodes.shape, 1.0 / (hi - lo))
    return MixingDensity(grid=nodes, values=vals / float(weights @ vals), quadrature_weights=weights)


def ess_approx_continuous(
    theta: float,
    g: MixingDensity,
    alpha: float,
    kappa_fn: Callable,
    delta_fn: Callable,
    family: ExpFamilyModel,
) -> float:
    """Asymptotic approximation of I_theta * E_theta[T] for a continuous mixture.

    |log alpha| + (1/2) log|log alpha| - (1 + log 2pi)/2
    + log[ e^{kappa(theta)} sqrt(psi''(theta)/I_theta) / g(theta) * integral(delta g) ].
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    theta = family.require(float(theta))
    info = family.kl_null(theta)
    if info <= 0.0:
        raise ConfigError(f"I_theta vanishes at theta={theta}")
    gval = g.value_at(theta)
    if gval <= 0.0:
        raise ConfigError(f"mixing density vanishes at theta={theta}")
    int_dg = float(g.quadrature_weights @ (np.array([delta_fn(t) for t in g.grid]) * g.values))
    la = -math.log(alpha)
    return (
        la
        + 0.5 * math.log(la)
        - 0.5 * (1.0 + _LOG_2PI)
        + float(kappa_fn(theta))
        + 0.5 * math.log(family.fisher(theta) / info)
        - math.log(gval)
        + math.log(int_dg)
    )
