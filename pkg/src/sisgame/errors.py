"""Exception types shared across the solvers and the CLI."""


class ValidationError(ValueError):
    """Raised when inputs violate an operation's preconditions."""


class NonConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget.

    The last iterate and its residual are kept so callers can inspect how
    far the solver got.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
