"""Exception types shared across the package."""


class PolywalkError(Exception):
    """Base class for all package errors."""


class DimensionError(PolywalkError):
    """Operands have incompatible shapes."""


class InfeasibleBodyError(PolywalkError):
    """A body (or constraint specification) has no interior point.

    ``binding`` optionally names the constraint subset found responsible.
    """

    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding or []


class UnboundedBodyError(PolywalkError):
    """The body is unbounded in a direction the operation cannot handle."""


class UnboundedRayError(PolywalkError):
    """A ray from an interior point never reaches the boundary."""


class DegenerateStartError(PolywalkError):
    """An oracle was started on (or outside) the boundary."""


class DegenerateBoundaryError(PolywalkError):
    """The boundary normal is undefined at the requested point."""


class SupportError(PolywalkError):
    """A density was evaluated outside its support where that is not allowed."""


class ConfigurationError(PolywalkError):
    """Incompatible (body, target, walk) pairing or invalid run settings."""


class ConvergenceError(PolywalkError):
    """An iterative routine failed to converge; carries an iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
