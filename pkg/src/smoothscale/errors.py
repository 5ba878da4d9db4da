"""Exception types raised across the package."""


class SmoothscaleError(Exception):
    """Base class for all package errors."""


class InvalidParameter(SmoothscaleError, ValueError):
    pass


class FormatError(SmoothscaleError):
    """Malformed raster file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UndefinedStatistic(SmoothscaleError, ValueError):
    pass


class InvariantViolation(SmoothscaleError, AssertionError):
    """A mathematical invariant failed; this indicates a bug, not bad input."""


class ResourceLimit(SmoothscaleError):
    pass


class NumericError(SmoothscaleError, ArithmeticError):
    pass
