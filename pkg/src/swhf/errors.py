"""Exception hierarchy shared across the package."""


class SwhfError(Exception):
    """Base class for all package errors."""


class GraphError(SwhfError, ValueError):
    """Invalid graph description."""


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class NonPositiveWeightError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class DensityError(SwhfError, ValueError):
    """Vector is not a probability density on the graph."""


class BoundaryDensityError(DensityError):
    """A quantity that blows up on the simplex boundary was requested there."""


class ConfigError(SwhfError, ValueError):
    """Configuration could not be parsed or validated.

    ``fields`` lists the offending dotted field paths.
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)


class IntegrationError(SwhfError, ArithmeticError):
    """Time stepping produced non-finite values."""

    def __init__(self, message, *, time=None, step=None, path=None):
        super().__init__(message)
        self.time = time
        self.step = step
        self.path = path


class DegenerateNoiseError(SwhfError, ValueError):
    """The reweighting factor 1 + eps*dW/dt came too close to zero."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class ConvergenceError(SwhfError, ArithmeticError):
    """Iterative solver exhausted its budget."""

    def __init__(self, message, *, gap=None, residual=None, iterations=None):
        super().__init__(message)
        self.gap = gap
        self.residual = residual
        self.iterations = iterations
