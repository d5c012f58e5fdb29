"""Exception hierarchy shared by the simulation tools and the CLI."""

from typing import Optional


class UictError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(UictError, ValueError):
    """An argument lies outside the domain of an operation (m = 0, k < 1 - m, x0 < 0, ...)."""


class IllegalMoveError(DomainError):
    """A (-)-move was requested on a boundary of length 1."""

    def __init__(self, index: int, message: Optional[str] = None):
        self.index = index
        super().__init__(message or f"illegal (-)-move at index {index}: boundary length is 1")


class InsufficientLengthError(UictError):
    """A trajectory ran out before the requested number of strip stops was found."""

    def __init__(self, found: int, wanted: int):
        self.found = found
        self.wanted = wanted
        super().__init__(f"insufficient length: found {found} strip stops, wanted {wanted}")


class NotGrowthRepresentableError(UictError):
    """The triangulation is not produced by any growth sequence."""


class NotStoppedError(UictError):
    """The move sequence does not end exactly at a strip boundary."""


class InvariantViolation(UictError, AssertionError):
    """A strip-level identity failed while sampling or detecting stops."""


class TruncatedClockError(UictError):
    """The time-change clock did not reach the requested horizon."""

    def __init__(self, available: float, wanted: float):
        self.available = available
        self.wanted = wanted
        super().__init__(f"clock reaches only {available:.6g}, wanted {wanted:.6g}")


class AcceptanceFailure(UictError):
    """An acceptance check did not meet its threshold."""
