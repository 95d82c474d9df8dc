"""Real Dirichlet characters of small modulus and generalized Bernoulli numbers."""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd

from sympy import Rational
from sympy.ntheory import factorint, jacobi_symbol
from sympy.polys.appellseqs import bernoulli_poly

from ovmf.domain.errors import UnsupportedLevelError, UsageError


@dataclass(frozen=True, slots=True)
class DirichletCharacter:
    """A character with values in {0, +1, -1}, tabulated on residues mod ``modulus``."""

    modulus: int
    values: tuple[int, ...]
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.values) != self.modulus:
            raise UsageError("value table length must equal the modulus")
        if self.values[1 % self.modulus] != 1:
            raise UsageError("chi(1) must be 1")
        for a, value in enumerate(self.values):
            if value not in (-1, 0, 1):
                raise UsageError(f"only real characters are supported (chi({a}) = {value})")
            if (value == 0) != (gcd(a, self.modulus) > 1):
                raise UsageError(f"chi({a}) must vanish exactly on non-units")

    def __call__(self, n: int) -> int:
        return self.values[n % self.modulus]

    @property
    def is_trivial(self) -> bool:
        return all(v in (0, 1) for v in self.values)

    @property
    def parity(self) -> int:
        """chi(-1): +1 for even characters, -1 for odd ones."""
        return self(-1)

    @property
    def is_odd(self) -> bool:
        return self.parity == -1

    @property
    def conductor(self) -> int:
        """Conductor of a real character (trivial or primitive quadratic)."""
        if self.is_trivial:
            return 1
        return self.modulus

    def __repr__(self) -> str:
        return self.label or f"DirichletCharacter(mod {self.modulus})"


def trivial_character(modulus: int = 1) -> DirichletCharacter:
    values = tuple(1 if gcd(a, modulus) == 1 else 0 for a in range(modulus))
    return DirichletCharacter(modulus, values, label=f"1_{modulus}")


def kronecker_symbol(D: int, n: int) -> int:
    """The Kronecker symbol (D | n) for n >= 1."""
    if n < 1:
        raise UsageError(f"kronecker symbol needs n >= 1 (got {n})")
    result = 1
    while n % 2 == 0:
        n //= 2
        if D % 2 == 0:
            return 0
        result *= 1 if D % 8 in (1, 7) else -1
    if n == 1:
        return result
    return result * int(jacobi_symbol(D % n, n))


def is_fundamental_discriminant(D: int) -> bool:
    if D in (0, 1):
        return False
    if D % 4 == 1:
        return all(e == 1 for e in factorint(abs(D)).values())
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and all(e == 1 for e in factorint(abs(m)).values())
    return False


def kronecker_character(D: int) -> DirichletCharacter:
    """chi_D = (D | .) as a character of modulus |D|."""
    if not is_fundamental_discriminant(D):
        raise UsageError(f"{D} is not a fundamental discriminant")
    modulus = abs(D)
    values = tuple(0 if a == 0 else kronecker_symbol(D, a) for a in range(modulus))
    return DirichletCharacter(modulus, values, label=f"chi_{D}")


def character_group(N: int) -> list[DirichletCharacter]:
    """Primitive characters whose conductor divides N, for N in {1, 3, 4}.

    Every character of these moduli is real, which is what the Eisenstein
    machinery supports.
    """
    if N == 1:
        return [trivial_character(1)]
    if N in (3, 4):
        return [trivial_character(1), kronecker_character(-N)]
    raise UnsupportedLevelError(f"character group of modulus {N} is not supported")


@lru_cache(maxsize=256)
def _bernoulli_poly_values(k: int, modulus: int) -> tuple[Fraction, ...]:
    poly = bernoulli_poly(k, polys=True)
    values = []
    for a in range(1, modulus + 1):
        r = poly.eval(Rational(a, modulus))
        values.append(Fraction(int(r.p), int(r.q)))
    return tuple(values)


def generalized_bernoulli(chi: DirichletCharacter, k: int) -> Fraction:
    """B_{k,chi} = N^(k-1) * sum_{a=1}^{N} chi(a) B_k(a/N) with N the modulus."""
    if k < 0:
        raise UsageError(f"k must be non-negative (got {k})")
    N = chi.modulus
    values = _bernoulli_poly_values(k, N)
    total = sum(
        (chi(a) * values[a - 1] for a in range(1, N + 1)), start=Fraction(0)
    )
    return Fraction(N) ** (k - 1) * total
