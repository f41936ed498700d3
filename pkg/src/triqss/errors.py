"""Exception types shared across the package."""


class QssError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(QssError, ValueError):
    """An argument is outside its physical or mathematical domain."""


class DegenerateGainError(QssError, ArithmeticError):
    """The detection gain is zero, so conditional rates are undefined."""


class NumericalDegeneracyError(QssError, ArithmeticError):
    """A closed-form expression lost validity (negative discriminant or similar)."""


class ProtocolAbortError(QssError, RuntimeError):
    """The protocol run cannot produce a key under the given conditions."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ZeroCountError(ProtocolAbortError):
    """Expected counts in a required basis set fall below one event."""


class AllAbortError(ProtocolAbortError):
    """Every candidate evaluated by the optimizer aborted with zero key."""


class CountTableError(QssError, ValueError):
    """A detection-count table is malformed.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
