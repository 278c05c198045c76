"""Exception hierarchy shared by every module."""


class BetheLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BetheLabError, ValueError):
    """Invalid parameters, caught before any computation starts."""


class SizeError(ConfigurationError):
    """Requested object is too large for the selected backend."""


class NumericalSingularityError(BetheLabError, ArithmeticError):
    """A linear system is singular to working precision."""


class ConvergenceError(BetheLabError, RuntimeError):
    """An iterative method hit its iteration cap."""


class PoleError(BetheLabError, ArithmeticError):
    """Evaluation hit a pole of a meromorphic expression."""


class DiagnosticsError(BetheLabError, RuntimeError):
    """A sampler produced a degenerate state."""


class VerificationFailure(BetheLabError, AssertionError):
    """A deterministic check was violated.

    The offending report (with the seed and stream needed to reproduce the
    failing sample) is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
