"""Unit tests for real Dirichlet characters and generalized Bernoulli numbers."""
from fractions import Fraction

import pytest

from ovmf.domain.dirichlet import (
    DirichletCharacter,
    character_group,
    generalized_bernoulli,
    is_fundamental_discriminant,
    kronecker_character,
    kronecker_symbol,
    trivial_character,
)
from ovmf.domain.errors import UnsupportedLevelError, UsageError


class TestKroneckerSymbol:
    @pytest.mark.parametrize(
        ("D", "n", "expected"),
        [
            (-4, 3, -1),
            (-4, 5, 1),
            (-4, 2, 0),
            (-3, 2, -1),
            (-3, 7, 1),
            (-3, 5, -1),
            (-3, 3, 0),
            (-7, 2, 1),
            (-8, 3, 1),
        ],
    )
    def test_values(self, D: int, n: int, expected: int) -> None:
        assert kronecker_symbol(D, n) == expected

    def test_needs_positive_argument(self) -> None:
        with pytest.raises(UsageError):
            kronecker_symbol(-4, 0)


class TestCharacters:
    def test_fundamental_discriminants(self) -> None:
        assert is_fundamental_discriminant(-3)
        assert is_fundamental_discriminant(-4)
        assert is_fundamental_discriminant(-8)
        assert not is_fundamental_discriminant(-12)
        assert not is_fundamental_discriminant(-5)

    def test_kronecker_character_of_gaussian_field(self) -> None:
        """Given D = -4
        When building chi_D
        Then it is the odd character mod 4 with conductor 4.
        """
        # When
        chi = kronecker_character(-4)

        # Then
        assert chi.values == (0, 1, 0, -1)
        assert chi.is_odd
        assert chi.conductor == 4
        assert chi(7) == -1
        assert repr(chi) == "chi_-4"

    def test_trivial_character(self) -> None:
        one = trivial_character(4)

        assert one.is_trivial
        assert one.conductor == 1
        assert one(2) == 0
        assert one(3) == 1

    def test_rejects_non_real_values(self) -> None:
        with pytest.raises(UsageError):
            DirichletCharacter(3, (0, 1, 2))

    def test_character_group(self) -> None:
        assert len(character_group(1)) == 1
        assert [c.conductor for c in character_group(3)] == [1, 3]
        with pytest.raises(UnsupportedLevelError):
            character_group(5)


class TestGeneralizedBernoulli:
    def test_weight_one_class_number_formula(self) -> None:
        """B_{1,chi_D} = -2h/w_K: -1/2 for D=-4 and -1/3 for D=-3."""
        assert generalized_bernoulli(kronecker_character(-4), 1) == Fraction(-1, 2)
        assert generalized_bernoulli(kronecker_character(-3), 1) == Fraction(-1, 3)

    def test_trivial_character_gives_bernoulli_numbers(self) -> None:
        one = trivial_character(1)

        assert generalized_bernoulli(one, 2) == Fraction(1, 6)
        assert generalized_bernoulli(one, 4) == Fraction(-1, 30)
        assert generalized_bernoulli(one, 6) == Fraction(1, 42)

    def test_odd_character_even_index_vanishes(self) -> None:
        assert generalized_bernoulli(kronecker_character(-4), 2) == 0

    def test_weight_three(self) -> None:
        # B_{3,chi_{-3}} = 2/3
        assert generalized_bernoulli(kronecker_character(-3), 3) == Fraction(2, 3)
