"""Exception types raised across the package."""


class SelfTestError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SelfTestError, ValueError):
    """Array shapes or index sets do not match."""


class NotHermitianError(SelfTestError, ValueError):
    def __init__(self, residual):
        super().__init__(f"matrix is not Hermitian (residual {residual:.3e})")
        self.residual = residual


class NotPSD(SelfTestError, ValueError):
    """Raised when a matrix that must be positive has a negative eigenvalue."""

    def __init__(self, eigenvalue):
        super().__init__(f"matrix is not positive semidefinite (eigenvalue {eigenvalue:.6g})")
        self.eigenvalue = eigenvalue


class ValidationError(SelfTestError, ValueError):
    """An object failed one of its defining constraints.

    ``constraint`` names the worst offender and ``residual`` is its size.
    """

    def __init__(self, constraint, residual, message=None):
        msg = message or f"{constraint} violated (residual {residual:.3e})"
        super().__init__(msg)
        self.constraint = constraint
        self.residual = residual


class NotConverged(SelfTestError, RuntimeError):
    """Word-algebra generation did not close within the allowed length."""


class NotOptimal(SelfTestError, ValueError):
    def __init__(self, bias, target, gap):
        super().__init__(f"model is not CHSH-optimal: bias {bias:.12g}, target {target:.12g}, gap {gap:.3e}")
        self.bias = bias
        self.gap = gap


class NotEquivalent(SelfTestError, ValueError):
    """No (unitary) intertwiner exists between the given objects."""


class SchemaError(SelfTestError, ValueError):
    """A JSON document does not match the expected layout; ``path`` locates the problem."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
