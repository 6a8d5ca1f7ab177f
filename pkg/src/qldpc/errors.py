"""Exception types raised across the toolkit."""

from __future__ import annotations


class QldpcError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(QldpcError, ValueError):
    """Operands have incompatible shapes."""


class CapacityError(QldpcError, ValueError):
    """A result would be too large to represent."""


class DomainError(QldpcError, ValueError):
    """An argument lies outside its allowed range."""


class ParseError(QldpcError, ValueError):
    """Text input could not be parsed."""


class CssViolation(QldpcError, ValueError):
    """H_X H_Z^T is nonzero."""

    def __init__(self, x_row: int, z_row: int) -> None:
        super().__init__(f"X check {x_row} and Z check {z_row} overlap on an odd number of qubits")
        self.x_row = x_row
        self.z_row = z_row


class EmptyLogicalSpace(QldpcError, ValueError):
    """The code encodes no logical qubits."""


class BudgetExceeded(QldpcError, RuntimeError):
    """An exhaustive search would exceed its enumeration budget."""


class LiftError(QldpcError, ValueError):
    """Base matrices use different lift sizes."""


class CommutationError(QldpcError, ValueError):
    """Two-block inputs do not commute."""


class PolicyError(QldpcError, ValueError):
    """A layering policy does not apply to the given code."""


class InconsistentSyndrome(QldpcError, ValueError):
    """No error pattern produces the given syndrome."""
