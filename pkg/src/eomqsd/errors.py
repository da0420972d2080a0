"""Exception hierarchy for the package."""


class EomqsdError(Exception):
    """Base class for all package errors."""


class InvalidBasisError(EomqsdError, ValueError):
    pass


class CapacityError(EomqsdError, ValueError):
    pass


class UnknownModeError(EomqsdError, KeyError):
    pass


class TruncationError(EomqsdError, ValueError):
    """A state does not fit in the requested Fock cutoff."""


class MetricError(EomqsdError, ValueError):
    pass


class DomainError(EomqsdError, ValueError):
    pass


class ScheduleError(EomqsdError, ValueError):
    pass


class BistabilityError(EomqsdError):
    """No stable steady state among the roots; ``roots`` lists all of them."""

    def __init__(self, message, roots):
        super().__init__(message)
        self.roots = roots


class IterationLimitError(EomqsdError):
    pass


class StepSizeError(EomqsdError):
    """Integration became unstable (norm left [0.5, 1.5] before renormalizing)."""

    def __init__(self, message, t=None, seed=None):
        super().__init__(message)
        self.t = t
        self.seed = seed


class OracleCapError(EomqsdError, ValueError):
    pass


class ConfigError(EomqsdError, ValueError):
    """Invalid experiment configuration; ``path`` is the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ReportError(EomqsdError, ValueError):
    pass


class OutputExistsError(ConfigError):
    """The results directory already holds output and overwrite was not requested."""
