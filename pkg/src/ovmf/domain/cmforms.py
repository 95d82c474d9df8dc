"""CM eigenforms from trivial-conductor Grossencharacters and their critical p-stabilization."""
from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction
from math import isqrt

from sympy import isprime

from ovmf.domain.dirichlet import DirichletCharacter, kronecker_character
from ovmf.domain.errors import (
    ConsistencyError,
    IrregularConfigurationError,
    UsageError,
)
from ovmf.domain.padic import (
    ResidueInt,
    ResidueRing,
    hensel_roots,
    newton_slopes,
)
from ovmf.domain.qseries import RATIONALS, QSeries, vp_operator
from ovmf.infrastructure.logging import get_logger

logger = get_logger(component="cmforms")

CLASS_NUMBER_ONE_DISCRIMINANTS = (-3, -4, -7, -8, -11, -19, -43, -67, -163)


def unit_count(D: int) -> int:
    """Number of roots of unity in the ring of integers of Q(sqrt(D))."""
    return {-3: 6, -4: 4}.get(D, 2)


class SplitType(StrEnum):
    SPLIT = "split"
    INERT = "inert"
    RAMIFIED = "ramified"


@dataclass(frozen=True)
class CMSpec:
    """Discriminant, weight and (optionally) the prime p with target precision m."""

    D: int
    k: int
    p: int | None = None
    m: int = 1
    character: DirichletCharacter = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.D not in CLASS_NUMBER_ONE_DISCRIMINANTS:
            raise UsageError(
                f"D={self.D} is not a class-number-one imaginary quadratic discriminant"
            )
        if self.k < 2:
            raise UsageError(f"weight must be >= 2 (got {self.k})")
        if (self.k - 1) % self.w_K:
            raise UsageError(
                f"w_K={self.w_K} does not divide k-1={self.k - 1}: "
                "alpha -> alpha^(k-1) is not well defined on ideals"
            )
        if self.m < 1:
            raise UsageError(f"precision must be >= 1 (got {self.m})")
        object.__setattr__(self, "character", kronecker_character(self.D))
        if self.p is not None:
            if self.p < 5 or not isprime(self.p):
                raise UsageError(f"p must be a prime >= 5 (got {self.p})")
            if self.N % self.p == 0:
                raise UsageError(f"p={self.p} divides the level {self.N}")
            if self.character(self.p) != 1:
                raise IrregularConfigurationError(
                    f"p={self.p} does not split in Q(sqrt({self.D}))"
                )

    @property
    def w_K(self) -> int:
        return unit_count(self.D)

    @property
    def N(self) -> int:
        return abs(self.D)

    @property
    def infinity_exponent(self) -> int:
        return self.k - 1

    @property
    def prime(self) -> int:
        if self.p is None:
            raise UsageError("this operation needs a prime p")
        return self.p

    def chi_ell(self, ell: int) -> int:
        """chi_K(ell) * ell^(k-1), the scalar of the Hecke recursion at ell."""
        return self.character(ell) * ell ** (self.k - 1)

    def smallest_inert_prime(self) -> int:
        ell = 2
        while self.character(ell) != -1:
            ell += 1
            while not isprime(ell):
                ell += 1
        return ell

    def to_json(self) -> dict[str, int | None]:
        return {"D": self.D, "k": self.k, "p": self.p, "m": self.m, "N": self.N}


def split_type(spec: CMSpec, ell: int) -> SplitType:
    value = spec.character(ell)
    if value == 1:
        return SplitType.SPLIT
    if value == -1:
        return SplitType.INERT
    return SplitType.RAMIFIED


def _integral_basis(D: int) -> tuple[int, int]:
    """(t, n) with omega^2 = t*omega + n for the basis {1, omega}."""
    if D % 4 == 1:
        return 1, (D - 1) // 4
    return 0, D // 4


def _norm(a: int, b: int, D: int) -> int:
    if D % 4 == 1:
        return a * a + a * b + b * b * (1 - D) // 4
    return a * a - (D // 4) * b * b


def _power(a: int, b: int, e: int, t: int, n: int) -> tuple[int, int]:
    """(a + b*omega)^e in Z[omega] with omega^2 = t*omega + n."""
    u, v = 1, 0
    for _ in range(e):
        u, v = u * a + v * b * n, u * b + v * a + v * b * t
    return u, v


def cm_qexpansion(spec: CMSpec, T: int) -> QSeries:
    """a_n = (1/w_K) sum over x in O_K with Nm(x) = n of x^(k-1)."""
    D, e = spec.D, spec.k - 1
    t, n = _integral_basis(D)
    sums = [[0, 0] for _ in range(T + 1)]
    b_max = isqrt(4 * T // abs(D)) + 1
    a_max = isqrt(T) + b_max + 1
    for b in range(-b_max, b_max + 1):
        for a in range(-a_max, a_max + 1):
            norm = _norm(a, b, D)
            if 0 < norm <= T:
                u, v = _power(a, b, e, t, n)
                sums[norm][0] += u
                sums[norm][1] += v

    coeffs = [Fraction(0)] * (T + 1)
    for norm in range(1, T + 1):
        u, v = sums[norm]
        if v != 0 or u % spec.w_K:
            raise ConsistencyError(f"non-integral CM coefficient at q^{norm}")
        coeffs[norm] = Fraction(u // spec.w_K)
    return QSeries(tuple(coeffs), RATIONALS)


@dataclass(frozen=True)
class StabilizedForm:
    """The critical p-stabilization f = g0 - beta * g0(q^p) and its U_p data."""

    g0: QSeries
    f: QSeries
    a_p: int
    alpha: ResidueInt
    beta: ResidueInt
    chi_p: int
    k: int

    def hecke_polynomial(self) -> list[int]:
        """Coefficients [c0, c1, c2] of X^2 - a_p X + chi(p) p^(k-1)."""
        return [self.chi_p * self.alpha.p ** (self.k - 1), -self.a_p, 1]

    def slopes(self) -> list[Fraction]:
        return newton_slopes(self.hecke_polynomial(), self.alpha.p)


def stabilize(spec: CMSpec, g0: QSeries, m_work: int | None = None) -> StabilizedForm:
    """Critical p-stabilization of g0 modulo p^m_work (default: the target m)."""
    p = spec.prime
    m = spec.m if m_work is None else m_work
    if m < spec.k:
        raise UsageError(f"working precision {m} must exceed k-1={spec.k - 1}")
    ring = ResidueRing(p, m)
    a_p = int(g0.coeffs[p])
    chi_p = spec.character(p)

    alpha, beta = hensel_roots(ring(chi_p * p ** (spec.k - 1)), ring(-a_p))
    if alpha.valuation() != spec.k - 1 or beta.valuation() != 0:
        raise ConsistencyError(
            f"root valuations ({alpha.valuation()}, {beta.valuation()}) "
            f"differ from (k-1, 0) = ({spec.k - 1}, 0)"
        )

    g = g0.reduce(ring)
    f = g - vp_operator(g, p, cap=g.T).scale(beta)

    limit = f.T // p
    for n in range(1, limit + 1):
        if (f.coeffs[n * p] - alpha.value * f.coeffs[n]) % ring.modulus:
            raise ConsistencyError(f"U_p-eigenform identity fails at n={n}")

    logger.info(
        "critical stabilization computed",
        D=spec.D,
        k=spec.k,
        p=p,
        m=m,
        a_p=a_p,
        alpha_valuation=alpha.valuation(),
    )
    return StabilizedForm(
        g0=g0, f=f, a_p=a_p, alpha=alpha, beta=beta, chi_p=chi_p, k=spec.k
    )


def assumption_report(spec: CMSpec, stab: StabilizedForm) -> dict[str, object]:
    """valuation(beta/alpha) = -(k-1) < 1 = valuation(p) for the standing assumption."""
    ratio_valuation = stab.beta.valuation() - stab.alpha.valuation()
    return {
        "alpha_valuation": stab.alpha.valuation(),
        "beta_valuation": stab.beta.valuation(),
        "ratio_valuation": ratio_valuation,
        "slopes": [str(s) for s in stab.slopes()],
        "verified": ratio_valuation == -(spec.k - 1) and ratio_valuation < 1,
    }


def hecke_recursion_residual(g0: QSeries, spec: CMSpec, sign: int = 1, bound: int = 50) -> int:
    """Count of failures of a_{l^(r+1)} = a_l a_{l^r} - sign*chi(l) l^(k-1) a_{l^(r-1)}."""
    failures = 0
    for ell in range(2, min(bound, g0.T) + 1):
        if not isprime(ell) or spec.N % ell == 0:
            continue
        c = sign * spec.chi_ell(ell)
        prev, cur = Fraction(1), g0.coeffs[ell]
        power = ell
        while power * ell <= g0.T:
            nxt = g0.coeffs[power * ell]
            if nxt != g0.coeffs[ell] * cur - c * prev:
                failures += 1
            prev, cur = cur, nxt
            power *= ell
    return failures
