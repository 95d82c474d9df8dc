"""Arithmetic in Z/p^m with valuation bookkeeping and Hensel lifting."""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from ovmf.domain.errors import (
    IrregularConfigurationError,
    NonInvertibleError,
    UsageError,
)

Operand = Union["ResidueInt", int]


def valuation_of_int(n: int, p: int, cap: int) -> int:
    """p-adic valuation of an integer, capped at ``cap`` (zero maps to ``cap``)."""
    if n == 0:
        return cap
    v = 0
    while v < cap and n % p == 0:
        n //= p
        v += 1
    return v


def reduce_rational(q: Fraction | int, p: int, m: int) -> int:
    """Canonical representative of a p-integral rational mod p^m."""
    modulus = p**m
    if isinstance(q, int):
        return q % modulus
    if q.denominator % p == 0:
        raise UsageError(f"{q} is not {p}-integral")
    return q.numerator * pow(q.denominator, -1, modulus) % modulus


@dataclass(frozen=True, slots=True)
class ResidueInt:
    """An integer mod p^m kept in canonical form 0 <= value < p^m."""

    value: int
    p: int
    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise UsageError(f"precision must be >= 1 (got {self.m})")
        modulus = self.p**self.m
        if not 0 <= self.value < modulus:
            object.__setattr__(self, "value", self.value % modulus)

    @property
    def modulus(self) -> int:
        return self.p**self.m

    def _coerce(self, other: Operand) -> int:
        if isinstance(other, ResidueInt):
            if other.p != self.p or other.m != self.m:
                raise UsageError(
                    f"mismatched rings: Z/{self.p}^{self.m} and Z/{other.p}^{other.m}"
                )
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented  # type: ignore[unreachable]

    def _make(self, value: int) -> "ResidueInt":
        return ResidueInt(value % self.modulus, self.p, self.m)

    def __add__(self, other: Operand) -> "ResidueInt":
        return self._make(self.value + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other: Operand) -> "ResidueInt":
        return self._make(self.value - self._coerce(other))

    def __rsub__(self, other: Operand) -> "ResidueInt":
        return self._make(self._coerce(other) - self.value)

    def __mul__(self, other: Operand) -> "ResidueInt":
        return self._make(self.value * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "ResidueInt":
        return self._make(-self.value)

    def __pow__(self, exponent: int) -> "ResidueInt":
        if exponent < 0:
            return invert(self) ** (-exponent)
        return self._make(pow(self.value, exponent, self.modulus))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ResidueInt):
            return (self.value, self.p, self.m) == (other.value, other.p, other.m)
        if isinstance(other, int):
            return self.value == other % self.modulus
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.value, self.p, self.m))

    def __int__(self) -> int:
        return self.value

    def __str__(self) -> str:
        return str(self.value)

    def valuation(self) -> int:
        return valuation_of_int(self.value, self.p, self.m)

    def is_unit(self) -> bool:
        return self.value % self.p != 0

    def reduce(self, m: int) -> "ResidueInt":
        """Image in Z/p^m for m <= self.m."""
        if m > self.m:
            raise UsageError(f"cannot raise precision from {self.m} to {m}")
        return ResidueInt(self.value % self.p**m, self.p, m)


@dataclass(frozen=True, slots=True)
class ResidueRing:
    """The ring Z/p^m, used as the parent of residues, series and matrices."""

    p: int
    m: int
    modulus: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.p < 2 or self.m < 1:
            raise UsageError(f"invalid residue ring Z/{self.p}^{self.m}")
        object.__setattr__(self, "modulus", self.p**self.m)

    def __call__(self, value: int | Fraction) -> ResidueInt:
        return ResidueInt(self.reduce(value), self.p, self.m)

    @property
    def zero(self) -> ResidueInt:
        return ResidueInt(0, self.p, self.m)

    @property
    def one(self) -> ResidueInt:
        return ResidueInt(1, self.p, self.m)

    def reduce(self, value: int | Fraction) -> int:
        return reduce_rational(value, self.p, self.m)

    def valuation(self, value: int) -> int:
        return valuation_of_int(value % self.modulus, self.p, self.m)

    def inverse(self, value: int) -> int:
        value %= self.modulus
        if value % self.p == 0:
            raise NonInvertibleError(self.valuation(value))
        return pow(value, -1, self.modulus)

    def with_precision(self, m: int) -> "ResidueRing":
        return ResidueRing(self.p, m)


def valuation(x: ResidueInt) -> int:
    """Largest v <= m with p^v | x; m for zero."""
    return x.valuation()


def invert(x: ResidueInt) -> ResidueInt:
    """Multiplicative inverse of a unit residue."""
    if not x.is_unit():
        raise NonInvertibleError(x.valuation())
    return ResidueInt(pow(x.value, -1, x.modulus), x.p, x.m)


def hensel_roots(c0: ResidueInt, c1: ResidueInt) -> tuple[ResidueInt, ResidueInt]:
    """Roots (alpha, beta) of X^2 + c1*X + c0 with beta the unit root.

    Newton iteration starts from the unit root mod p, which is simple when c0
    is divisible by p and c1 is a unit. Then alpha = -c1 - beta and
    alpha*beta = c0 hold to full precision.
    """
    if (c0.p, c0.m) != (c1.p, c1.m):
        raise UsageError("coefficients live in different rings")
    p, m = c0.p, c0.m
    if c0.is_unit() or not c1.is_unit():
        raise IrregularConfigurationError(
            f"X^2 + {c1}X + {c0} has no simple unit root mod {p}: "
            f"valuations of coefficients are ({c1.valuation()}, {c0.valuation()})"
        )

    beta = -c1
    for _ in range(m.bit_length() + 1):
        value = beta * beta + c1 * beta + c0
        if value.value == 0:
            break
        beta = beta - value * invert(beta * 2 + c1)
    if (beta * beta + c1 * beta + c0).value != 0:
        raise IrregularConfigurationError("Newton iteration failed to converge")

    alpha = -c1 - beta
    return alpha, beta


def newton_slopes(coeffs: list[int], p: int) -> list[Fraction]:
    """Valuations of the roots of sum(coeffs[i] * X^i), read off the Newton polygon.

    Roots at zero (leading zero coefficients) are not reported.
    """
    points = [
        (i, valuation_of_int(c, p, 10**9)) for i, c in enumerate(coeffs) if c != 0
    ]
    if len(points) < 2:
        return []

    hull: list[tuple[int, int]] = []
    for point in points:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            cross = (x1 - x0) * (point[1] - y0) - (y1 - y0) * (point[0] - x0)
            if cross > 0:
                break
            hull.pop()
        hull.append(point)

    slopes: list[Fraction] = []
    for (x0, y0), (x1, y1) in zip(hull, hull[1:], strict=False):
        root_valuation = -Fraction(y1 - y0, x1 - x0)
        slopes.extend([root_valuation] * (x1 - x0))
    return sorted(slopes)
