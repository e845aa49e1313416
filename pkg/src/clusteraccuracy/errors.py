"""Exception types shared across the package."""


class ClusterAccuracyError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ClusterAccuracyError, ValueError):
    """An argument violates a documented precondition."""


class SingularCovarianceError(ClusterAccuracyError):
    """Covariance could not be factored even after jitter escalation.

    Typically signals coincident sample points combined with a smoothness
    exponent close to 2, where the joint covariance is numerically
    indefinite rather than merely rank deficient.
    """


class CalibrationInfeasibleError(ClusterAccuracyError):
    """No constraint factor in (0, 1] attains the requested accuracy."""


class ConfigError(ClusterAccuracyError):
    """An experiment configuration is malformed or inconsistent."""
