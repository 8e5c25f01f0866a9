class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class NumericError(FloatingPointError):
    """A numeric routine produced a non-finite value (CLI exit code 4)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
