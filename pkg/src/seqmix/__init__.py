"""One-sided mixture-based sequential tests.

Design of nearly minimax mixture stopping rules for a simple null
against finitely many (or exponential-family) alternatives: overshoot
summaries, optimal mixing distributions and densities, asymptotic
performance formulas, stopping-rule execution, and a Monte Carlo
harness with importance sampling.
"""

from .engine import (
    ContinuousTestState,
    DiscreteTestState,
    StopReport,
    run_continuous,
    run_discrete,
    run_sprt,
    step_discrete,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    NonPositiveDriftError,
    NonUniqueClosestIndexError,
    QuadratureUnderflowError,
    SeqmixError,
    StreamExhaustedError,
)
from .mixing import (
    MixingDensity,
    MixingDistribution,
    PerformanceReport,
    asymptotic_loss,
    equalizer_defect,
    ess_approx_continuous,
    ess_approx_discrete,
    gauss_legendre_grid,
    max_kl_approx,
    minimax_lower_bound,
    named_mixing,
    optimal_density,
    optimal_mixing,
    performance_report,
    threshold_for_alpha,
    uniform_density,
)
from .models import (
    DiscreteAlternatives,
    ExpFamilyAlternatives,
    ExpFamilyModel,
    GaussianMeanModel,
    KLMatrix,
    closest_active_index,
    cross_kl_exp_family,
    exponential_rate_family,
    gaussian_shift_family,
    kl_numbers,
    loglr_increment,
)
from .montecarlo import (
    ComparisonRow,
    Estimate,
    MaxKLEstimate,
    SimConfig,
    compare_to_asymptotics,
    estimate_error_probability,
    estimate_ess,
    estimate_max_kl,
)
from .renewal import (
    OvershootSummary,
    exp_family_exponential_summary,
    gaussian_delta,
    gaussian_kappa,
    gaussian_overshoot_summary,
    mc_overshoot_summary,
    overshoot_cross_summary,
)

__version__ = "0.1.0"
