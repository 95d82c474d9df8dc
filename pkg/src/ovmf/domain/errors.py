"""Exception hierarchy shared by every layer of ovmf.

Each error carries the machine-readable fields a caller needs to decide what
to do next (retry at higher precision, report a witness, map to an exit code).
"""
from typing import Any


class OvmfError(Exception):
    """Base class for all ovmf errors."""

    def details(self) -> dict[str, Any]:
        """Machine-readable payload attached to the error."""
        return {}


class UsageError(OvmfError, ValueError):
    """Invalid arguments or mismatched rings."""


class NonInvertibleError(OvmfError, ArithmeticError):
    """Attempted to invert a residue that is not a unit."""

    def __init__(self, valuation: int) -> None:
        super().__init__(f"residue is not a unit (valuation {valuation})")
        self.valuation = valuation

    def details(self) -> dict[str, Any]:
        return {"valuation": self.valuation}


class IrregularConfigurationError(OvmfError):
    """The split-prime hypothesis fails for the requested configuration."""


class UnsupportedLevelError(OvmfError):
    """Level, character group or weight outside the supported range."""


class ConsistencyError(OvmfError):
    """An internal invariant did not hold."""


class NotInSpaceError(OvmfError):
    """A q-expansion is not in the span of a basis to the required precision."""

    def __init__(self, residual_valuation: int, required: int, where: str = "") -> None:
        message = (
            f"residual valuation {residual_valuation} below required {required}"
        )
        if where:
            message = f"{where}: {message}"
        super().__init__(message)
        self.residual_valuation = residual_valuation
        self.required = required
        self.where = where

    def details(self) -> dict[str, Any]:
        return {
            "residual_valuation": self.residual_valuation,
            "required": self.required,
            "where": self.where,
        }


class EigenspaceError(OvmfError):
    """The eigenform is missing from the computed eigenspace."""

    def __init__(self, message: str, ranks: list[int], precisions: list[int]) -> None:
        super().__init__(message)
        self.ranks = ranks
        self.precisions = precisions

    def details(self) -> dict[str, Any]:
        return {"ranks": self.ranks, "precisions": self.precisions}


class NormalizationError(OvmfError):
    """The coefficient designated for scaling is not a unit."""

    def __init__(self, coefficient: int, valuation: int) -> None:
        super().__init__(
            f"cannot scale by a_{coefficient}: valuation {valuation} is positive"
        )
        self.coefficient = coefficient
        self.valuation = valuation

    def details(self) -> dict[str, Any]:
        return {"coefficient": self.coefficient, "valuation": self.valuation}


class InsufficientPrecisionError(OvmfError):
    """Certified precision fell short of the target."""

    def __init__(self, m_verified: int, m_target: int) -> None:
        super().__init__(f"verified precision {m_verified} < target {m_target}")
        self.m_verified = m_verified
        self.m_target = m_target

    def details(self) -> dict[str, Any]:
        return {"m_verified": self.m_verified, "m_target": self.m_target}
