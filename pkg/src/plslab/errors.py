"""Exception types shared across the package."""


class PlsLabError(Exception):
    """Base class for all errors raised by plslab."""


class ShapeError(PlsLabError, ValueError):
    """An array does not match the grid or mask it is used with."""


class NyquistError(PlsLabError, ValueError):
    """A frequency region does not fit inside the lattice."""


class EmptyRegionError(PlsLabError, ValueError):
    """A mask or point set that must be non-empty is empty."""


class CapacityError(PlsLabError, ValueError):
    """A dense computation was requested above its size cap."""


class ConvergenceError(PlsLabError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    ``estimate`` and ``residual`` hold the best values reached.
    """

    def __init__(self, message, estimate=None, residual=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations


class BudgetError(PlsLabError, ValueError):
    """A requested computation exceeds a configured budget."""


class ConfigError(PlsLabError, ValueError):
    """An experiment configuration is malformed.  ``path`` names the key."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path
