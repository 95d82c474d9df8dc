"""Unit tests for truncated q-expansions."""
import random
from fractions import Fraction

import pytest

from ovmf.domain.errors import UsageError
from ovmf.domain.padic import ResidueInt, ResidueRing
from ovmf.domain.qseries import (
    RATIONALS,
    QSeries,
    hecke_coeff_transform,
    kronecker_product,
    power,
    theta,
    theta_power,
    up_operator,
    vp_operator,
)


def rational(values: list[int | Fraction]) -> QSeries:
    return QSeries.from_coefficients(values, RATIONALS)


class TestKroneckerProduct:
    def test_small_product(self) -> None:
        assert kronecker_product([1, 2], [3, 4], 3) == [3, 10, 8]

    def test_truncates_and_pads(self) -> None:
        assert kronecker_product([1, 1, 1], [1, 1, 1], 2) == [1, 2]
        assert kronecker_product([0, 0], [5], 3) == [0, 0, 0]

    def test_matches_schoolbook_on_large_entries(self) -> None:
        a = [10**30 + n for n in range(6)]
        b = [7**40 - n for n in range(6)]
        expected = [sum(a[i] * b[n - i] for i in range(n + 1)) for n in range(6)]

        assert kronecker_product(a, b, 6) == expected


class TestRationalSeries:
    def test_signed_product(self) -> None:
        """(1 - q)(1 + q) = 1 - q^2."""
        product = rational([1, -1, 0, 0]) * rational([1, 1, 0, 0])

        assert product.coeffs == (1, 0, -1, 0)

    def test_geometric_inverse(self) -> None:
        inverse = rational([1, -1, 0, 0, 0, 0]).inverse()

        assert inverse.coeffs == (1,) * 6

    def test_inverse_with_fraction_constant(self) -> None:
        f = rational([Fraction(1, 2), 3, 0, 1])

        assert (f * f.inverse()).coeffs == (1, 0, 0, 0)

    def test_zero_constant_has_no_inverse(self) -> None:
        with pytest.raises(UsageError):
            rational([0, 1, 2]).inverse()

    def test_power_by_squaring(self) -> None:
        assert power(rational([1, 1, 0, 0, 0]), 4).coeffs == (1, 4, 6, 4, 1)

    def test_valuation_needs_residues(self) -> None:
        with pytest.raises(UsageError):
            rational([1, 2]).valuation()


class TestResidueSeries:
    def test_inverse_mod_prime_power(self) -> None:
        """Given 1 + 5q over Z/125
        When inverting
        Then the coefficients are (-5)^n reduced mod 125.
        """
        # Given
        ring = ResidueRing(5, 3)
        f = QSeries.from_coefficients([1, 5, 0, 0, 0], ring)

        # When
        inverse = f.inverse()

        # Then
        assert inverse.coeffs == (1, 120, 25, 0, 0)

    def test_getitem_wraps_residues(self, ring_25: ResidueRing) -> None:
        f = QSeries.from_coefficients([1, -1, Fraction(1, 2)], ring_25)

        assert f[1] == ResidueInt(24, 5, 2)
        assert f[2] == ResidueInt(13, 5, 2)
        with pytest.raises(IndexError):
            _ = f[3]

    def test_valuation_from_index(self, ring_25: ResidueRing) -> None:
        f = QSeries.from_coefficients([1, 5, 10, 0], ring_25)

        assert f.valuation() == 0
        assert f.valuation(start=1) == 1
        assert f.valuation(start=3) == 2

    def test_mismatched_rings_raise(self, ring_25: ResidueRing) -> None:
        f = QSeries.one(3, ring_25)
        g = QSeries.one(3, ResidueRing(5, 3))

        with pytest.raises(UsageError):
            _ = f + g

    def test_reduce_and_lift(self, ring_25: ResidueRing) -> None:
        f = rational([Fraction(1, 3), -2, 30])
        reduced = f.reduce(ResidueRing(5, 3)).reduce(ring_25)

        assert reduced.coeffs == (17, 23, 5)
        assert reduced.lift().coeffs == (17, 23, 5)
        assert not reduced.lift().is_residue

    def test_reduction_commutes_with_product(self, rng: random.Random) -> None:
        """Given 200 random pairs of 5-integral rational series
        When multiplying over Q and reducing, or reducing and multiplying over Z/5^4
        Then both routes give the same residues.
        """
        ring = ResidueRing(5, 4)
        for _ in range(200):
            # Given
            length = rng.randint(1, 25)
            f, g = (
                rational(
                    [
                        Fraction(rng.randint(-(10**12), 10**12), rng.choice((1, 2, 3, 7, 12)))
                        for _ in range(length)
                    ]
                )
                for _ in range(2)
            )

            # When
            over_q = (f * g).reduce(ring)
            over_residues = f.reduce(ring) * g.reduce(ring)

            # Then
            assert over_q == over_residues


class TestOperators:
    def test_up_and_vp(self) -> None:
        f = rational(list(range(11)))

        assert up_operator(f, 2).coeffs == (0, 2, 4, 6, 8, 10)
        assert vp_operator(rational([1, 2, 3]), 2).coeffs == (1, 0, 2, 0, 3)
        assert vp_operator(rational([1, 2, 3]), 2, cap=3).T == 3

    def test_theta(self) -> None:
        f = rational([5, 1, 1, 1])

        assert theta(f).coeffs == (0, 1, 2, 3)
        assert theta_power(f, 3).coeffs == (0, 1, 8, 27)

    def test_hecke_transform_on_eigenform(self, gaussian_g0: QSeries) -> None:
        """Given the CM form of weight 5 and level 4
        When applying T_5 on coefficients
        Then the result is a_5 times the form.
        """
        # Given
        chi_5 = 5**4  # chi_{-4}(5) = 1

        # When
        image = hecke_coeff_transform(gaussian_g0, 5, 5, chi_5)

        # Then
        expected = gaussian_g0.truncate(image.T).scale(gaussian_g0.coeffs[5])
        assert image.coeffs == expected.coeffs

    def test_monomial_beyond_truncation_is_zero(self) -> None:
        assert QSeries.monomial(5, 3).order() is None
        assert QSeries.monomial(2, 3).order() == 2

    def test_json_keeps_exact_values(self) -> None:
        f = rational([Fraction(-1, 24), 1, 3])

        assert f.to_json() == {"T": 2, "coeffs": ["-1/24", "1", "3"]}
        assert QSeries.from_json(f.to_json()) == f
