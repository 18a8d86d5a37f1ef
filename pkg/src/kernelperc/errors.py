"""Exception types shared across the package."""


class ConfigError(Exception):
    """Raised when an experiment config file is missing, malformed, or out of range."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its budget.

    Carries the last iterate and residual so callers can inspect or resume.
    """

    def __init__(self, message, *, last=None, residual=None, trace=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.trace = trace
