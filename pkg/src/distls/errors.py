"""Exception hierarchy shared by all modules."""


class DistLSError(Exception):
    pass


class InvalidArgument(DistLSError, ValueError):
    """Bad shapes, ids or parameter values."""


class PreconditionViolation(DistLSError):
    """Input is well formed but violates an operation's precondition."""


class DegenerateInstance(DistLSError):
    """The Hessian splitting has a nonpositive diagonal entry."""


class LineSearchFailure(DistLSError):
    """Backtracking exceeded its cap without satisfying the exit condition."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ProtocolFault(DistLSError):
    """A simulated node tried to reach state outside its 1-hop neighborhood."""
