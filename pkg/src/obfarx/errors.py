"""Exception types shared across the package."""


class ObfArxError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(ObfArxError, ValueError):
    """Matrix or signal dimensions are mutually inconsistent."""


class UnstableSystemError(ObfArxError, ValueError):
    """An operation that requires a Schur-stable matrix received one with
    spectral radius >= 1."""


class ConvergenceError(ObfArxError, RuntimeError):
    """An iterative solver hit its iteration cap before meeting tolerance."""


class ExcitationError(ObfArxError, RuntimeError):
    """The regressor second-moment block is numerically singular, so the
    least-squares coefficients are not identifiable."""


class SimulationError(ObfArxError, RuntimeError):
    """Simulation produced a non-finite state; carries the offending step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(ObfArxError, ValueError):
    """A run configuration file is malformed or violates a constraint."""
