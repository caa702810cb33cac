"""Exception and warning classes raised across the package."""


class BmcError(Exception):
    """Base class for every error raised by bmcluster."""


class ValidationError(BmcError, ValueError):
    """Input failed validation. ``field`` names the offending input when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DimensionMismatch(ValidationError):
    pass


class ClusterTooSmall(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class StateOutOfRange(ValidationError):
    pass


class SamePair(ValidationError):
    pass


class EmptyCluster(ValidationError):
    pass


class Reducible(BmcError):
    """The block transition matrix has more than one communicating class."""


class SingularSystem(BmcError):
    pass


class SvdFailure(BmcError):
    pass


class NoSignChange(BmcError):
    """Bisection endpoints do not bracket a root."""


class ZeroRowWarning(UserWarning):
    """A cluster was never left, so its row of transition estimates is undefined."""


class TrimClampWarning(UserWarning):
    """The trimming formula asked for more removals than the matrix can afford."""
