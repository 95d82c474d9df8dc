"""Truncated q-expansions over the rationals or over Z/p^m.

A series stores the coefficients of q^0..q^T. Over Z/p^m the coefficients are
kept as canonical ints and wrapped in ResidueInt on access; over the rationals
they are Fractions. Products use Kronecker substitution: the coefficient lists
are packed into one big integer, multiplied once, and unpacked.
"""
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Any, Final

from ovmf.domain.errors import UsageError
from ovmf.domain.padic import ResidueInt, ResidueRing, valuation_of_int


@dataclass(frozen=True, slots=True)
class RationalField:
    """Marker ring for exact rational coefficients."""

    def __repr__(self) -> str:
        return "QQ"


RATIONALS: Final = RationalField()

ScalarRing = RationalField | ResidueRing
Scalar = int | Fraction | ResidueInt


def kronecker_product(a: Sequence[int], b: Sequence[int], n_terms: int) -> list[int]:
    """First ``n_terms`` coefficients of the product of two non-negative int lists."""
    a = a[:n_terms]
    b = b[:n_terms]
    if not a or not b:
        return [0] * n_terms
    top_a, top_b = max(a), max(b)
    if top_a == 0 or top_b == 0:
        return [0] * n_terms

    bits = (top_a * top_b * min(len(a), len(b))).bit_length() + 1
    width = (bits + 7) // 8
    packed_a = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in a), "little")
    packed_b = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in b), "little")
    product = (packed_a * packed_b).to_bytes(width * (len(a) + len(b)), "little")

    out = [
        int.from_bytes(product[i * width : (i + 1) * width], "little")
        for i in range(min(n_terms, len(a) + len(b) - 1))
    ]
    out.extend([0] * (n_terms - len(out)))
    return out


def _signed_product(a: Sequence[int], b: Sequence[int], n_terms: int) -> list[int]:
    a_pos = [x if x > 0 else 0 for x in a]
    a_neg = [-x if x < 0 else 0 for x in a]
    b_pos = [x if x > 0 else 0 for x in b]
    b_neg = [-x if x < 0 else 0 for x in b]
    pp = kronecker_product(a_pos, b_pos, n_terms)
    pn = kronecker_product(a_pos, b_neg, n_terms)
    np_ = kronecker_product(a_neg, b_pos, n_terms)
    nn = kronecker_product(a_neg, b_neg, n_terms)
    return [w - x - y + z for w, x, y, z in zip(pp, pn, np_, nn, strict=True)]


@dataclass(frozen=True, slots=True)
class QSeries:
    """Coefficients a_0..a_T of a q-expansion over a single scalar ring."""

    coeffs: tuple[Any, ...]
    ring: ScalarRing

    @classmethod
    def from_coefficients(cls, values: Iterable[Scalar], ring: ScalarRing) -> "QSeries":
        if isinstance(ring, ResidueRing):
            normalized: list[Any] = [ring.reduce(_lift(v)) for v in values]
        else:
            normalized = [Fraction(_lift(v)) for v in values]
        if not normalized:
            raise UsageError("a series needs at least the constant coefficient")
        return cls(tuple(normalized), ring)

    @classmethod
    def zero(cls, T: int, ring: ScalarRing = RATIONALS) -> "QSeries":
        zero: Any = 0 if isinstance(ring, ResidueRing) else Fraction(0)
        return cls((zero,) * (T + 1), ring)

    @classmethod
    def monomial(
        cls, n: int, T: int, ring: ScalarRing = RATIONALS, coefficient: Scalar = 1
    ) -> "QSeries":
        values: list[Scalar] = [0] * (T + 1)
        if n <= T:
            values[n] = coefficient
        return cls.from_coefficients(values, ring)

    @classmethod
    def one(cls, T: int, ring: ScalarRing = RATIONALS) -> "QSeries":
        return cls.monomial(0, T, ring)

    @property
    def T(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_residue(self) -> bool:
        return isinstance(self.ring, ResidueRing)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, n: int) -> Fraction | ResidueInt:
        if not 0 <= n <= self.T:
            raise IndexError(f"coefficient {n} beyond truncation {self.T}")
        if isinstance(self.ring, ResidueRing):
            return ResidueInt(self.coeffs[n], self.ring.p, self.ring.m)
        return self.coeffs[n]  # type: ignore[no-any-return]

    def raw(self, n: int) -> Any:
        return self.coeffs[n]

    def _check_ring(self, other: "QSeries") -> None:
        if self.ring != other.ring:
            raise UsageError(f"mismatched scalar rings {self.ring!r} and {other.ring!r}")

    def _wrap(self, values: Iterable[Any]) -> "QSeries":
        if isinstance(self.ring, ResidueRing):
            n = self.ring.modulus
            return QSeries(tuple(v % n for v in values), self.ring)
        return QSeries(tuple(values), self.ring)

    def __add__(self, other: "QSeries") -> "QSeries":
        self._check_ring(other)
        return self._wrap(a + b for a, b in zip(self.coeffs, other.coeffs, strict=False))

    def __sub__(self, other: "QSeries") -> "QSeries":
        self._check_ring(other)
        return self._wrap(a - b for a, b in zip(self.coeffs, other.coeffs, strict=False))

    def __neg__(self) -> "QSeries":
        return self._wrap(-a for a in self.coeffs)

    def __mul__(self, other: "QSeries") -> "QSeries":
        return mul(self, other)

    def scale(self, c: Scalar) -> "QSeries":
        if isinstance(self.ring, ResidueRing):
            factor: Any = self.ring.reduce(_lift(c))
        else:
            factor = Fraction(_lift(c))
        return self._wrap(factor * a for a in self.coeffs)

    def truncate(self, T: int) -> "QSeries":
        if T > self.T:
            raise UsageError(f"cannot extend truncation {self.T} to {T}")
        return QSeries(self.coeffs[: T + 1], self.ring)

    def padded(self, T: int) -> "QSeries":
        """Extend with zero coefficients; only valid for polynomials."""
        zero: Any = 0 if self.is_residue else Fraction(0)
        return QSeries(self.coeffs + (zero,) * max(0, T - self.T), self.ring)

    def reduce(self, ring: ResidueRing) -> "QSeries":
        """Image over Z/p^m of a p-integral rational (or coarser residue) series."""
        if isinstance(self.ring, ResidueRing):
            if self.ring.p != ring.p or self.ring.m < ring.m:
                raise UsageError(f"cannot reduce {self.ring!r} to {ring!r}")
            return QSeries(tuple(a % ring.modulus for a in self.coeffs), ring)
        return QSeries(tuple(ring.reduce(a) for a in self.coeffs), ring)

    def lift(self) -> "QSeries":
        """Rational series with the canonical residue representatives."""
        return QSeries(tuple(Fraction(a) for a in self.coeffs), RATIONALS)

    def valuation(self, start: int = 0) -> int:
        """Minimum coefficient valuation from index ``start`` on (m for zero)."""
        if not isinstance(self.ring, ResidueRing):
            raise UsageError("valuation is defined for residue series only")
        ring = self.ring
        return min(
            (valuation_of_int(a, ring.p, ring.m) for a in self.coeffs[start:]),
            default=ring.m,
        )

    def order(self) -> int | None:
        """Index of the first nonzero coefficient."""
        for n, a in enumerate(self.coeffs):
            if a != 0:
                return n
        return None

    def inverse(self) -> "QSeries":
        """Multiplicative inverse of a series with invertible constant term."""
        return inverse(self)

    def to_json(self) -> dict[str, Any]:
        if isinstance(self.ring, ResidueRing):
            coeffs = [str(a) for a in self.coeffs]
            return {"T": self.T, "p": self.ring.p, "m": self.ring.m, "coeffs": coeffs}
        return {"T": self.T, "coeffs": [_fraction_str(a) for a in self.coeffs]}

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "QSeries":
        ring: ScalarRing = RATIONALS
        if "p" in payload:
            ring = ResidueRing(int(payload["p"]), int(payload["m"]))
        coeffs = [Fraction(c) for c in payload["coeffs"]]
        if len(coeffs) != int(payload["T"]) + 1:
            raise UsageError("coefficient count does not match truncation")
        return cls.from_coefficients(coeffs, ring)


def _lift(value: Scalar) -> int | Fraction:
    if isinstance(value, ResidueInt):
        return value.value
    return value


def _fraction_str(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def mul(f: QSeries, g: QSeries) -> QSeries:
    """Cauchy product known to min(T_f, T_g)."""
    f._check_ring(g)
    n_terms = min(len(f), len(g))
    if isinstance(f.ring, ResidueRing):
        modulus = f.ring.modulus
        product = kronecker_product(f.coeffs, g.coeffs, n_terms)
        return QSeries(tuple(c % modulus for c in product), f.ring)

    den_f = lcm(*(a.denominator for a in f.coeffs[:n_terms]))
    den_g = lcm(*(a.denominator for a in g.coeffs[:n_terms]))
    ints_f = [int(a * den_f) for a in f.coeffs[:n_terms]]
    ints_g = [int(a * den_g) for a in g.coeffs[:n_terms]]
    product = _signed_product(ints_f, ints_g, n_terms)
    den = den_f * den_g
    return QSeries(tuple(Fraction(c, den) for c in product), f.ring)


def power(f: QSeries, exponent: int) -> QSeries:
    """f**exponent by repeated squaring (exponent >= 0)."""
    if exponent < 0:
        return power(inverse(f), -exponent)
    result = QSeries.one(f.T, f.ring)
    base = f
    while exponent:
        if exponent & 1:
            result = mul(result, base)
        exponent >>= 1
        if exponent:
            base = mul(base, base)
    return result


def inverse(f: QSeries) -> QSeries:
    """Newton iteration g <- g*(2 - f*g), doubling the known length each step."""
    T = f.T
    if isinstance(f.ring, ResidueRing):
        ring = f.ring
        g = [ring.inverse(f.coeffs[0])]
        known = 1
        while known < T + 1:
            known = min(2 * known, T + 1)
            fg = kronecker_product(f.coeffs[:known], g, known)
            correction = [(-c) % ring.modulus for c in fg]
            correction[0] = (correction[0] + 2) % ring.modulus
            g = [c % ring.modulus for c in kronecker_product(g, correction, known)]
        return QSeries(tuple(g), ring)

    if f.coeffs[0] == 0:
        raise UsageError("series with zero constant term has no inverse")
    series = QSeries((1 / f.coeffs[0],), RATIONALS)
    known = 1
    while known < T + 1:
        known = min(2 * known, T + 1)
        head = f.truncate(known - 1)
        g_pad = series.padded(known - 1)
        two_minus = -mul(head, g_pad)
        two_minus = QSeries((two_minus.coeffs[0] + 2,) + two_minus.coeffs[1:], RATIONALS)
        series = mul(g_pad, two_minus)
    return series


def up_operator(f: QSeries, p: int) -> QSeries:
    """U_p: b_n = a_{np}, known to floor(T/p)."""
    return QSeries(f.coeffs[:: p][: f.T // p + 1], f.ring)


def vp_operator(f: QSeries, p: int, cap: int | None = None) -> QSeries:
    """V_p (q -> q^p): b_{np} = a_n, known to T*p, optionally capped."""
    T = f.T * p if cap is None else min(f.T * p, cap)
    zero: Any = 0 if f.is_residue else Fraction(0)
    values = [zero] * (T + 1)
    for n in range(T // p + 1):
        values[n * p] = f.coeffs[n]
    return QSeries(tuple(values), f.ring)


def theta(f: QSeries) -> QSeries:
    """theta = q d/dq: b_n = n * a_n."""
    return f._wrap(n * a for n, a in enumerate(f.coeffs))


def theta_power(f: QSeries, j: int) -> QSeries:
    """theta applied j times: b_n = n^j * a_n."""
    return f._wrap(pow(n, j) * a for n, a in enumerate(f.coeffs))


def hecke_coeff_transform(f: QSeries, ell: int, weight: int, chi_ell: Scalar) -> QSeries:
    """T_ell on coefficients: b_n = a_{n*ell} + chi_ell * a_{n/ell}.

    ``chi_ell`` is chi(ell) * ell^(weight - 1), precomputed by the caller.
    """
    if weight < 1:
        raise UsageError(f"weight must be positive (got {weight})")
    if isinstance(f.ring, ResidueRing):
        c: Any = f.ring.reduce(_lift(chi_ell))
    else:
        c = Fraction(_lift(chi_ell))
    T = f.T // ell
    values = [f.coeffs[n * ell] for n in range(T + 1)]
    for n in range(0, T + 1, ell):
        values[n] = values[n] + c * f.coeffs[n // ell]
    return f._wrap(values)
