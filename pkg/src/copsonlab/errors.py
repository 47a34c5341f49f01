"""Exception types; the CLI maps each to an exit code."""


class SpecError(ValueError):
    """Invalid parameters, sequence specs or input shapes."""


class NotSummableError(SpecError):
    """A tail sum was requested for a non-summable sequence."""


class DataError(ValueError):
    """Malformed input file."""


class ConvergenceError(RuntimeError):
    """An iteration did not converge; carries the last estimate and gap."""

    def __init__(self, message, estimate=None, gap=None):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap
