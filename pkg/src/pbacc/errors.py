"""Exception and warning types shared across the package."""


class GridCollisionError(ValueError):
    """An evaluation point coincides with an interpolation point."""


class InvalidShiftError(ValueError):
    """Mask points would overlap the data interval [-1, 1]."""


class InsufficientResultsError(RuntimeError):
    """Decoding was attempted with no usable worker results."""


class DegenerateWeightError(RuntimeError):
    """A rescaling weight is numerically zero at a worker's evaluation point."""


class CapacityError(ValueError):
    """Not enough worker nodes for the requested block partition."""


class IncompleteAssemblyError(ValueError):
    """Block products are missing for some (x, y) pairs."""

    def __init__(self, missing):
        self.missing = tuple(sorted(missing))
        super().__init__(f"missing decoded blocks: {list(self.missing)}")


class NumericalFailureError(RuntimeError):
    """A determinant or factorization produced a non-finite result."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class ConfigError(ValueError):
    """An experiment configuration failed to parse or validate."""


class DecodeConditionWarning(RuntimeWarning):
    """The interpolant built from the received set is poorly conditioned."""
