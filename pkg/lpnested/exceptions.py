"""Exception types raised by the toolkit."""
from typing import Optional


class LpNestedError(Exception):
    """Base class for all toolkit errors."""


class TreeSyntaxError(LpNestedError, ValueError):
    """Malformed tree DSL text."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class TreeStructureError(LpNestedError, ValueError):
    """Tree violates a structural invariant (child count, leaf layout, exponent)."""


class DimensionError(LpNestedError, ValueError):
    """Input dimension does not match the tree or model."""


class DomainError(LpNestedError, ValueError):
    """Argument outside the domain of a function or distribution."""


class DataError(LpNestedError, ValueError):
    """Unusable input data (files, degenerate covariance, too few samples)."""


class NumericalError(LpNestedError, ArithmeticError):
    """Computation hit a singular or boundary point."""
