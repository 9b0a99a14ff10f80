"""Exception types shared across the package."""


class SpinbosonError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SpinbosonError):
    """A scenario or solver configuration is invalid."""


class QuadratureError(SpinbosonError):
    """A numerical integral did not reach the requested accuracy.

    Carries the best value obtained and the achieved error estimate.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class ExpansionFitError(SpinbosonError):
    """The exponential decomposition could not reach its target.

    ``best_error`` is the smallest certified deviation achieved before
    giving up.
    """

    def __init__(self, message, best_error=None):
        super().__init__(message)
        self.best_error = best_error


class FitConvergenceError(SpinbosonError):
    """A nonlinear least-squares fit failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TopologySizeError(SpinbosonError):
    """The requested hierarchy exceeds the configured memory budget."""


class SolverInstabilityError(SpinbosonError):
    """The hierarchy propagation blew up; ``t_blowup`` is where."""

    def __init__(self, message, t_blowup=None):
        super().__init__(message)
        self.t_blowup = t_blowup


class MissingSnapshotError(SpinbosonError):
    """An operation needs an equilibrated hierarchy snapshot that is absent."""


class FrequencyExtractionError(SpinbosonError):
    """Too little oscillation in the analysis window to estimate a frequency."""


class CheckFailure(SpinbosonError):
    """A --check run missed at least one registered acceptance target."""
