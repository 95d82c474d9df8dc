"""Classical spaces M_w(Gamma_1(N)) for N in {3, 4} as exact q-expansion bases.

Two constructions live here. ``space_basis`` echelonizes Eisenstein series and
their products over the rationals and checks the rank against the dimension
formula. ``miller_basis`` writes the same space as monomials in two ring
generators, which is integral and unitriangular in q-order and therefore cheap
to reduce mod p^m; the Katz construction uses it at high weight.
"""
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from math import ceil
from typing import Any

from sympy import divisors, primefactors

from ovmf.domain.dirichlet import (
    DirichletCharacter,
    character_group,
    generalized_bernoulli,
    trivial_character,
)
from ovmf.domain.errors import (
    ConsistencyError,
    IrregularConfigurationError,
    UnsupportedLevelError,
    UsageError,
)
from ovmf.domain.padic import ResidueRing
from ovmf.domain.qseries import RATIONALS, QSeries, ScalarRing, mul, vp_operator
from ovmf.infrastructure.logging import get_logger

logger = get_logger(component="classical")

SUPPORTED_LEVELS = (3, 4)

# Index of the image of Gamma_1(N) in PSL_2(Z).
_PSL_INDEX = {3: 4, 4: 6}


def _check_level(N: int) -> None:
    if N not in SUPPORTED_LEVELS:
        raise UnsupportedLevelError(
            f"level {N} is not supported (supported: {SUPPORTED_LEVELS})"
        )


def dimension_oracle(N: int, w: int) -> int:
    """dim M_w(Gamma_1(N)) = floor(w * mu/12) + 1, mu the PSL_2(Z)-index."""
    _check_level(N)
    if w < 0:
        return 0
    return w * _PSL_INDEX[N] // 12 + 1


def sturm_bound(N: int, w: int) -> int:
    """ceil(w * [SL_2(Z) : Gamma_1(N)] / 12)."""
    index = N * N
    for ell in primefactors(N):
        index = index * (ell * ell - 1) // (ell * ell)
    return ceil(w * index / 12)


def eisenstein_series(
    phi: DirichletCharacter, psi: DirichletCharacter, w: int, T: int
) -> QSeries:
    """E_w^{phi,psi}: a_n = sum_{d|n} phi(n/d) psi(d) d^(w-1).

    The constant term is -B_{w,psi}/(2w) when phi is trivial and 0 otherwise.
    The weight-2 series with both characters trivial is not modular; use
    ``level_raised_weight_two`` instead.
    """
    if w < 1:
        raise UsageError(f"Eisenstein weight must be positive (got {w})")
    if phi.parity * psi.parity != (-1) ** w:
        raise UsageError(
            f"parity mismatch: {phi!r}(-1) * {psi!r}(-1) != (-1)^{w}"
        )
    if w == 2 and phi.is_trivial and psi.is_trivial:
        raise UsageError("E_2 with trivial characters needs the level-raised variant")

    coeffs = [Fraction(0)] * (T + 1)
    if phi.is_trivial:
        coeffs[0] = -generalized_bernoulli(psi, w) / (2 * w)
    for d in range(1, T + 1):
        weight = psi(d) * d ** (w - 1)
        if weight == 0:
            continue
        for multiple in range(1, T // d + 1):
            value = phi(multiple)
            if value:
                coeffs[d * multiple] += value * weight
    return QSeries(tuple(coeffs), RATIONALS)


def _quasi_weight_two(T: int) -> QSeries:
    coeffs = [Fraction(-1, 24)] + [Fraction(0)] * T
    for d in range(1, T + 1):
        for n in range(d, T + 1, d):
            coeffs[n] += d
    return QSeries(tuple(coeffs), RATIONALS)


def level_raised_weight_two(t: int, T: int) -> QSeries:
    """E_2(q) - t * E_2(q^t) with E_2 = -1/24 + sum sigma(n) q^n."""
    if t < 2:
        raise UsageError("level raising needs t >= 2")
    e2 = _quasi_weight_two(T)
    return e2 - vp_operator(e2, t, cap=T).scale(t)


def level_one_eisenstein(w: int, T: int) -> QSeries:
    """E_w = 1 - (2w/B_w) sum sigma_{w-1}(n) q^n for even w >= 4."""
    if w < 4 or w % 2:
        raise UsageError(f"level one Eisenstein series need even w >= 4 (got {w})")
    trivial = trivial_character(1)
    series = eisenstein_series(trivial, trivial, w, T)
    return series.scale(1 / series.coeffs[0])


def admissible_eisenstein(N: int, w: int, T: int) -> list[QSeries]:
    """Eisenstein series E^{phi,psi}(q^t) spanning the Eisenstein part of M_w(Gamma_1(N))."""
    _check_level(N)
    chars = character_group(N)
    series: list[QSeries] = []
    for phi in chars:
        for psi in chars:
            level = phi.conductor * psi.conductor
            if N % level or phi.parity * psi.parity != (-1) ** w:
                continue
            if w == 1 and not phi.is_trivial:
                # E_1^{phi,1} and E_1^{1,phi} coincide as modular forms.
                continue
            for t in divisors(N // level):
                if w == 2 and phi.is_trivial and psi.is_trivial:
                    if t > 1:
                        series.append(level_raised_weight_two(t, T))
                    continue
                base = eisenstein_series(phi, psi, w, T)
                series.append(base if t == 1 else vp_operator(base, t, cap=T))
    return series


def is_p_integral(series: QSeries, p: int) -> bool:
    """No p in any coefficient denominator, so the series reduces mod p^m."""
    return all(Fraction(a).denominator % p for a in series.coeffs)

def _height(x: Fraction) -> int:
    return max(abs(x.numerator), x.denominator)


def _rref(rows: Iterable[Sequence[Fraction]]) -> list[tuple[int, list[Fraction]]]:
    """Reduced row echelon form over Q; returns (pivot, row) pairs by pivot."""
    work = [list(r) for r in rows if any(r)]
    if not work:
        return []
    ncols = len(work[0])
    result: list[tuple[int, list[Fraction]]] = []
    for col in range(ncols):
        candidates = [i for i, r in enumerate(work) if r[col] != 0]
        if not candidates:
            continue
        best = min(candidates, key=lambda i: _height(work[i][col]))
        row = work.pop(best)
        inv = 1 / row[col]
        row = [x * inv for x in row]
        for other in work + [r for _, r in result]:
            c = other[col]
            if c:
                other[:] = [a - c * b for a, b in zip(other, row, strict=True)]
        result.append((col, row))
        work = [r for r in work if any(r)]
        if not work:
            break
    return result


@dataclass(frozen=True)
class ClassicalBasis:
    """Echelon basis of M_w(Gamma_1(N)) known to T terms; pivot coefficients are 1."""

    N: int
    w: int
    T: int
    basis: tuple[QSeries, ...]
    pivots: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def solve(self, series: QSeries) -> tuple[list[Fraction], QSeries]:
        """Coordinates in the echelon basis and the residual of the projection."""
        series = series.truncate(self.T)
        coefficients = [Fraction(series.coeffs[pivot]) for pivot in self.pivots]
        residual = series
        for c, b in zip(coefficients, self.basis, strict=True):
            if c:
                residual = residual - b.scale(c)
        return coefficients, residual

    def contains(self, series: QSeries) -> bool:
        _, residual = self.solve(series)
        return residual.order() is None

    def is_p_integral(self, p: int) -> bool:
        return all(is_p_integral(b, p) for b in self.basis)

    def reduce(self, ring: ResidueRing) -> list[QSeries]:
        return [b.reduce(ring) for b in self.basis]

    def to_json(self) -> dict[str, Any]:
        return {
            "level": self.N,
            "weight": self.w,
            "T": self.T,
            "rows": [b.to_json()["coeffs"] for b in self.basis],
        }


def _basis_from_rows(N: int, w: int, T: int, rows: list[list[Fraction]]) -> ClassicalBasis:
    echelon = _rref(rows)
    return ClassicalBasis(
        N=N,
        w=w,
        T=T,
        basis=tuple(QSeries(tuple(row), RATIONALS) for _, row in echelon),
        pivots=tuple(pivot for pivot, _ in echelon),
    )


def space_basis(N: int, w: int, T: int) -> ClassicalBasis:
    """Echelon basis of M_w(Gamma_1(N)) spanned by Eisenstein series and products."""
    expected = dimension_oracle(N, w)
    if T < sturm_bound(N, w):
        raise UsageError(f"truncation {T} below the Sturm bound {sturm_bound(N, w)}")
    if w == 0:
        return _basis_from_rows(N, 0, T, [list(QSeries.one(T).coeffs)])

    by_weight = {a: admissible_eisenstein(N, a, T) for a in range(1, w + 1)}
    spanning = list(by_weight[w])
    for a in range(1, w // 2 + 1):
        for left in by_weight[a]:
            for right in by_weight[w - a]:
                spanning.append(mul(left, right))

    basis = _basis_from_rows(N, w, T, [list(s.coeffs) for s in spanning])
    if basis.dimension < expected:
        logger.info("extending spanning set with triple products", level=N, weight=w)
        for a, b in combinations_with_replacement(range(1, w - 1), 2):
            c = w - a - b
            if c < b:
                continue
            for x in by_weight[a]:
                for y in by_weight[b]:
                    for z in by_weight[c]:
                        spanning.append(mul(mul(x, y), z))
        basis = _basis_from_rows(N, w, T, [list(s.coeffs) for s in spanning])

    if basis.dimension < expected:
        raise UnsupportedLevelError(
            f"Eisenstein products span rank {basis.dimension} < {expected} "
            f"in weight {w}, level {N}"
        )
    if basis.dimension > expected:
        raise ConsistencyError(
            f"rank {basis.dimension} exceeds the dimension formula {expected} "
            f"in weight {w}, level {N}"
        )
    logger.debug("classical basis built", level=N, weight=w, dimension=expected, T=T)
    return basis


@dataclass(frozen=True)
class RingGenerators:
    """A = 1 + O(q) of weight 1 and B = q + O(q^2) of weight ``weight_b``."""

    A: QSeries
    B: QSeries
    weight_b: int


def ring_generators(N: int, T: int, ring: ScalarRing = RATIONALS) -> RingGenerators:
    """Generators of the graded ring M_*(Gamma_1(N)) built from Eisenstein series."""
    _check_level(N)
    trivial = trivial_character(1)
    chi = character_group(N)[1]
    weight_one = eisenstein_series(trivial, chi, 1, T)
    A = weight_one.scale(1 / weight_one.coeffs[0])
    if N == 4:
        f2 = level_raised_weight_two(2, T)
        f4 = level_raised_weight_two(4, T)
        B = (f2.scale(3) - f4).scale(Fraction(1, 2))
        weight_b = 2
    else:
        B = eisenstein_series(chi, trivial, 3, T)
        weight_b = 3
    if A.coeffs[0] != 1 or B.coeffs[0] != 0 or B.coeffs[1] != 1:
        raise ConsistencyError(f"ring generators for level {N} are not normalized")
    if isinstance(ring, ResidueRing):
        return RingGenerators(A.reduce(ring), B.reduce(ring), weight_b)
    return RingGenerators(A, B, weight_b)


class MillerMonomials:
    """A^a * B^j with the powers of both generators cached as they are requested."""

    def __init__(self, N: int, T: int, ring: ScalarRing = RATIONALS) -> None:
        self.N = N
        self.T = T
        self.ring = ring
        self.generators = ring_generators(N, T, ring)
        self._a_powers = [QSeries.one(T, ring)]
        self._b_powers = [QSeries.one(T, ring)]

    @staticmethod
    def _power(table: list[QSeries], base: QSeries, exponent: int) -> QSeries:
        while len(table) <= exponent:
            table.append(mul(table[-1], base))
        return table[exponent]

    def monomial(self, w: int, j: int) -> QSeries:
        """A^(w - w_B j) * B^j, of weight w, q-order j and leading coefficient 1."""
        a = w - self.generators.weight_b * j
        if a < 0 or j < 0:
            raise UsageError(f"no monomial of weight {w} with B-degree {j}")
        return mul(
            self._power(self._a_powers, self.generators.A, a),
            self._power(self._b_powers, self.generators.B, j),
        )


def miller_basis(N: int, w: int, T: int, ring: ScalarRing = RATIONALS) -> list[QSeries]:
    """Monomials A^(w - w_B j) B^j, j < dim M_w; the j-th has q-order j and leading 1."""
    monomials = MillerMonomials(N, T, ring)
    return [monomials.monomial(w, j) for j in range(dimension_oracle(N, w))]


def complement_basis(
    lower: ClassicalBasis,
    scaled: list[QSeries],
    upper: ClassicalBasis,
    p: int | None = None,
) -> list[QSeries]:
    """Echelon complement of span(scaled) inside span(upper), leading coefficients 1.

    With ``p`` given, every complement vector must be p-integral; otherwise
    IrregularConfigurationError is raised, since it has no reduction mod p^m.
    """
    if lower.dimension != len(scaled):
        raise UsageError("scaled must hold one series per lower basis vector")

    echelon: list[tuple[int, QSeries]] = []

    def reduce(series: QSeries) -> QSeries:
        for pivot, row in echelon:
            c = series.coeffs[pivot]
            if c:
                series = series - row.scale(c)
        return series

    def insert(series: QSeries) -> QSeries | None:
        reduced = reduce(series)
        pivot = reduced.order()
        if pivot is None:
            return None
        normalized = reduced.scale(1 / reduced.coeffs[pivot])
        echelon.append((pivot, normalized))
        return normalized

    for s in scaled:
        s = s.truncate(upper.T)
        if not upper.contains(s):
            raise ConsistencyError(
                f"E * M_{lower.w} is not contained in M_{upper.w} at truncation {upper.T}"
            )
        insert(s)

    complement = []
    for b in upper.basis:
        added = insert(b)
        if added is not None:
            complement.append(added)

    if len(complement) != upper.dimension - lower.dimension:
        raise ConsistencyError(
            f"complement has dimension {len(complement)}, "
            f"expected {upper.dimension - lower.dimension}"
        )
    if p is not None:
        for index, series in enumerate(complement):
            if not is_p_integral(series, p):
                raise IrregularConfigurationError(
                    f"complement vector {index} of M_{lower.w} in M_{upper.w} "
                    f"has {p} in a denominator"
                )
    return complement
