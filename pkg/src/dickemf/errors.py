"""Exception types shared across the package."""


class DickeError(Exception):
    """Base class for all domain errors raised by this package."""


class DomainError(DickeError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateDenominator(DickeError):
    """The stationarity formula has no finite coupling at this point.

    Raised when the denominator sum of the stationary-coupling expression
    vanishes, e.g. at xi = 0 for a sign-symmetric Zeeman set.
    """


class ConvergenceFailure(DickeError):
    """Too few descent starts converged; parameters are likely pathological.

    Carries the best-effort report in the ``report`` attribute.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnresolvedTransition(DickeError):
    """Step-refinement levels disagree on the order of a transition."""


class NoRoot(DickeError):
    """No sign-change cell was found when seeding a root search."""


class CutoffNotConverged(DickeError):
    """Ground-state energy still moving when the photon cutoff is raised."""


class DimensionGuard(DickeError):
    """Requested diagonalization exceeds the desk-scale dimension limit."""


class InsufficientRange(DickeError):
    """Fit samples span too little dynamic range for a power-law fit."""


class BadFit(DickeError):
    """Best power-law fit quality is below the acceptance threshold."""


class ConfigError(DickeError):
    """A run configuration file or override is malformed."""
