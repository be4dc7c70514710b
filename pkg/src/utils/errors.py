"""Exception hierarchy for ChoiMap"""


class ChoiMapError(Exception):
    """Base class for every error raised by the library."""


class DomainError(ChoiMapError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(ChoiMapError, ValueError):
    """Invalid run configuration, layout or dimension mismatch."""


class DegenerateMeasureError(ChoiMapError, ValueError):
    """Weight function with vanishing total mass."""


class PrecisionError(ChoiMapError, ArithmeticError):
    """Recurrence lost positivity; the quadrature grid must be refined."""


class CapacityError(ChoiMapError, ValueError):
    """Dense many-body representation beyond the configured mode cap."""


class OrderingError(ChoiMapError, ValueError):
    """Mode block is not contiguous or a basis has the wrong ordering."""


class InvalidCorrelationError(ChoiMapError, ValueError):
    """Correlation matrix is not Hermitian or violates 0 <= n_k <= 1."""


class SingularMapError(ChoiMapError, ArithmeticError):
    """Dynamical map too ill-conditioned to invert."""

    def __init__(self, condition: float, tau: float = None):
        self.condition = condition
        self.tau = tau
        where = f" at tau={tau:g}" if tau is not None else ""
        super().__init__(f"Map is ill-conditioned{where} (condition number {condition:.3e})")


class MultiplicityError(ChoiMapError, ArithmeticError):
    """Leading eigenvalue of a map or generator is degenerate."""


class UnsupportedModelError(ChoiMapError, ValueError):
    """Requested model is outside what the chosen method can treat."""


class BundleError(ChoiMapError, ValueError):
    """Result bundle cannot be read or has a mismatched schema version."""
