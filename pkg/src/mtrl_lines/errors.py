"""Exception hierarchy shared by all modules."""


class MtrlError(Exception):
    """Base class for library errors."""


class ConfigError(MtrlError, ValueError):
    """Invalid input or configuration."""


class FrequencyRangeError(MtrlError, ValueError):
    """Frequency outside the domain of a dispersion model."""


class BelowCutoffError(FrequencyRangeError):
    """Waveguide evaluated at or below its TE10 cutoff."""


class InfeasibleError(MtrlError):
    """Constraints or band requirements cannot be met."""


class UnsupportedOrderError(MtrlError, ValueError):
    """Ruler order outside the embedded tables."""


class DegenerateError(MtrlError, ArithmeticError):
    """Numerically degenerate input (zero eigenvalue, singular measurement, ...)."""


class UnsupportedIndexError(MtrlError, ValueError):
    """Eigenvector requested for a repeated eigenvalue."""
