"""Exception types raised across the package."""


class DimensionMismatchError(ValueError):
    """Operators, states or effects of incompatible Hilbert-space dimension."""


class NotInformationallyCompleteError(ValueError):
    """A state ensemble or POVM does not span the full operator space."""


class SolverError(RuntimeError):
    """The conic solver did not return a usable solution."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
