"""Exception hierarchy and warning categories."""


class FactorIPWError(Exception):
    """Base class for all library errors."""


class DataError(FactorIPWError):
    """Invalid input data: missing cells, bad prices, misaligned panels."""


class DegenerateSeriesError(DataError):
    """A series has zero variance and cannot be standardized."""


class ConfigError(FactorIPWError):
    """Invalid run configuration (CLI flags or config file)."""


class EstimationError(FactorIPWError):
    """Numerical failure during estimation."""


class SeparationError(EstimationError):
    """Complete or quasi-complete separation in the logistic fit."""


class ConvergenceError(EstimationError):
    """Iterative fit did not converge; carries the last iterate."""

    def __init__(self, message, beta=None, iterations=None):
        super().__init__(message)
        self.beta = beta
        self.iterations = iterations


class SingularInformationError(EstimationError):
    """Information matrix is singular to working tolerance."""


class OverlapError(EstimationError):
    """Propensity scores violate the overlap requirement."""


class EstimandUndefinedError(EstimationError):
    """ATT is undefined (no treated or no control units)."""


class ExtremePropensityWarning(UserWarning):
    """Fitted scores very close to 0 or 1; weights may be unstable."""
