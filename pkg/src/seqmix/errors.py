"""Exception types shared across the package."""


class SeqmixError(Exception):
    """Base class for all errors raised by seqmix."""


class ConfigError(SeqmixError, ValueError):
    """Invalid user-supplied configuration or parameters."""


class NonUniqueClosestIndexError(SeqmixError, ValueError):
    """Two or more active alternatives are KL-equidistant from the true one."""


class NonPositiveDriftError(SeqmixError, ValueError):
    """The tracked random walk has no positive drift; the rule may never stop."""


class ConvergenceError(SeqmixError, RuntimeError):
    """A series or simulation failed to converge within its iteration cap."""


class QuadratureUnderflowError(SeqmixError, RuntimeError):
    """All quadrature nodes underflowed simultaneously in the mixture statistic."""


class StreamExhaustedError(SeqmixError, RuntimeError):
    """An observation stream ended before the rule stopped or hit its cap."""
