"""Unit tests for residues mod p^m, valuations and Hensel lifting."""
from fractions import Fraction

import pytest

from ovmf.domain.errors import (
    IrregularConfigurationError,
    NonInvertibleError,
    UsageError,
)
from ovmf.domain.padic import (
    ResidueInt,
    ResidueRing,
    hensel_roots,
    invert,
    newton_slopes,
    reduce_rational,
    valuation,
    valuation_of_int,
)


class TestValuations:
    def test_valuation_of_int_caps_zero_at_precision(self) -> None:
        assert valuation_of_int(0, 5, 3) == 3
        assert valuation_of_int(50, 5, 10) == 2
        assert valuation_of_int(7, 5, 3) == 0
        assert valuation_of_int(5**6, 5, 4) == 4

    def test_residue_valuation(self) -> None:
        assert valuation(ResidueInt(75, 5, 4)) == 2
        assert ResidueInt(0, 5, 4).valuation() == 4

    def test_reduce_rational_inverts_denominator(self) -> None:
        """Given 1/2 and modulus 25
        When reducing
        Then the representative is the inverse of 2 mod 25.
        """
        # Given / When
        value = reduce_rational(Fraction(1, 2), 5, 2)

        # Then
        assert value == 13
        assert 2 * value % 25 == 1

    def test_reduce_rational_rejects_p_in_denominator(self) -> None:
        with pytest.raises(UsageError):
            reduce_rational(Fraction(1, 5), 5, 2)


class TestResidueInt:
    def test_values_are_canonical(self) -> None:
        assert ResidueInt(-1, 5, 2).value == 24
        assert ResidueInt(26, 5, 2).value == 1

    def test_arithmetic_wraps_modulus(self) -> None:
        a = ResidueInt(3, 5, 2)
        b = ResidueInt(9, 5, 2)

        assert (a * b).value == 2
        assert (a + b).value == 12
        assert (a - b).value == 19
        assert (-a).value == 22
        assert (2 - a).value == 24
        assert a**3 == 2

    def test_mismatched_rings_raise(self) -> None:
        with pytest.raises(UsageError, match="mismatched rings"):
            _ = ResidueInt(1, 5, 2) + ResidueInt(1, 5, 3)

    def test_units_invert_and_non_units_do_not(self) -> None:
        """Given a unit and a non-unit in Z/25
        When inverting
        Then the unit inverts and the non-unit reports its valuation.
        """
        # Given
        unit = ResidueInt(7, 5, 2)
        non_unit = ResidueInt(10, 5, 2)

        # When
        inverse = invert(unit)

        # Then
        assert (inverse * unit).value == 1
        assert unit ** -1 == inverse
        with pytest.raises(NonInvertibleError) as excinfo:
            invert(non_unit)
        assert excinfo.value.valuation == 1
        assert excinfo.value.details() == {"valuation": 1}

    def test_reduce_lowers_precision_only(self) -> None:
        x = ResidueInt(124, 5, 3)

        assert x.reduce(1) == ResidueInt(4, 5, 1)
        with pytest.raises(UsageError):
            x.reduce(4)


class TestResidueRing:
    def test_factory_and_constants(self, ring_25: ResidueRing) -> None:
        assert ring_25.modulus == 25
        assert ring_25(Fraction(1, 2)) == ResidueInt(13, 5, 2)
        assert ring_25.zero.value == 0
        assert ring_25.one.value == 1
        assert ring_25.with_precision(3).modulus == 125

    def test_inverse(self) -> None:
        ring = ResidueRing(5, 3)

        assert ring.inverse(2) * 2 % 125 == 1
        with pytest.raises(NonInvertibleError):
            ring.inverse(25)

    def test_invalid_ring(self) -> None:
        with pytest.raises(UsageError):
            ResidueRing(5, 0)


class TestHenselRoots:
    def test_critical_and_ordinary_roots(self) -> None:
        """Given X^2 + 14X + 5^4 (a_5 = -14 for the weight-5 form of level 4)
        When lifting the roots mod 5^8
        Then one root has valuation 4, the other is a unit, and Vieta holds.
        """
        # Given
        ring = ResidueRing(5, 8)
        c0, c1 = ring(5**4), ring(14)

        # When
        alpha, beta = hensel_roots(c0, c1)

        # Then
        assert alpha.valuation() == 4
        assert beta.is_unit()
        assert alpha + beta == -14
        assert alpha * beta == 5**4
        assert (beta * beta + c1 * beta + c0).value == 0

    def test_unit_constant_term_is_irregular(self) -> None:
        ring = ResidueRing(5, 4)

        with pytest.raises(IrregularConfigurationError):
            hensel_roots(ring(1), ring(3))

    def test_coefficients_in_different_rings(self) -> None:
        with pytest.raises(UsageError):
            hensel_roots(ResidueRing(5, 4)(25), ResidueRing(5, 3)(1))


class TestNewtonSlopes:
    def test_hecke_polynomial_slopes(self) -> None:
        """X^2 - a_p X + p^(k-1) with a unit a_p has slopes 0 and k-1."""
        assert newton_slopes([5**4, 14, 1], 5) == [0, 4]
        assert newton_slopes([7**6, 286, 1], 7) == [0, 6]

    def test_supersingular_polynomial(self) -> None:
        assert newton_slopes([5**4, 0, 1], 5) == [2, 2]

    def test_constant_has_no_slopes(self) -> None:
        assert newton_slopes([3], 5) == []
