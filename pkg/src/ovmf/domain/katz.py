"""Katz expansions of overconvergent forms and the matrices of U_p and T_l.

Layer i of the basis is W_i * E_{p-1}^(-i), where W_i complements
E_{p-1} * M_{k+(i-1)(p-1)} inside M_{k+i(p-1)}. W_i is spanned by the Miller
monomials of q-order in [dim M_{k+(i-1)(p-1)}, dim M_{k+i(p-1)}), so the whole
basis is unitriangular in q-order: element j has q-order j and leading
coefficient 1. Coordinates are then read off by forward substitution, and
the coefficients from index d on measure how much of a series lies beyond
the truncated basis.
"""
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from typing import Any, Literal

from sympy import primerange

from ovmf.domain.classical import (
    MillerMonomials,
    complement_basis,
    dimension_oracle,
    level_one_eisenstein,
    space_basis,
    sturm_bound,
)
from ovmf.domain.cmforms import CMSpec
from ovmf.domain.eigen import ModMatrix, Vector, vector_valuation
from ovmf.domain.errors import ConsistencyError, NotInSpaceError, UsageError
from ovmf.domain.padic import ResidueRing
from ovmf.domain.qseries import (
    RATIONALS,
    QSeries,
    hecke_coeff_transform,
    mul,
    up_operator,
)
from ovmf.infrastructure.logging import get_logger

logger = get_logger(component="katz")

DEFAULT_SLACK = 10


def katz_weight(spec: CMSpec, i: int) -> int:
    return spec.k + i * (spec.prime - 1)


def katz_dimension(spec: CMSpec, n_levels: int) -> int:
    """Total size of the basis with layers 0..n_levels-1."""
    if n_levels < 1:
        raise UsageError(f"need at least one Katz layer (got {n_levels})")
    return dimension_oracle(spec.N, katz_weight(spec, n_levels - 1))


def auto_levels(m_work: int, p: int, k: int) -> int:
    """Depth at which truncating the Katz expansion costs less than p^m_work."""
    return max(ceil((m_work + 1) * (p + 1) / (p - 1)), ceil((m_work + k) * (p + 1) / p))


def auto_truncation(spec: CMSpec, n_levels: int, slack: int = DEFAULT_SLACK, ell: int = 0) -> int:
    return max(spec.prime, ell) * (katz_dimension(spec, n_levels) + slack)


def _layer_bounds(spec: CMSpec, i: int) -> tuple[int, int]:
    upper = dimension_oracle(spec.N, katz_weight(spec, i))
    lower = 0 if i == 0 else dimension_oracle(spec.N, katz_weight(spec, i - 1))
    return lower, upper


@dataclass(frozen=True, slots=True)
class Coordinates:
    """Katz coordinates of a series and the valuation of what the basis misses."""

    vector: Vector
    residual_valuation: int


@dataclass(frozen=True)
class KatzSystem:
    spec: CMSpec
    n_levels: int
    ring: ResidueRing
    T_q: int
    slack: int
    basis: tuple[QSeries, ...]
    layer_index: tuple[int, ...]
    E: QSeries
    U: ModMatrix
    hecke: dict[int, ModMatrix] = field(default_factory=dict)
    residual_valuation: int = 0
    hecke_residuals: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.ring.m

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def operator_residual(self) -> int:
        """Worst residual valuation over every U_p and T_l column solve."""
        return min(
            self.residual_valuation,
            *(min(columns, default=self.m) for columns in self.hecke_residuals.values()),
        )

    def coords(self, f: QSeries, required: int | None = None, where: str = "") -> Coordinates:
        return coords(self, f, required=required, where=where)

    def expand(self, vector: Sequence[int]) -> QSeries:
        return expand(self, vector)

    def extended(self, T_q: int) -> "KatzSystem":
        """Same basis and operators rebuilt with a longer q-truncation."""
        if T_q <= self.T_q:
            return self
        return build_katz(
            self.spec,
            self.n_levels,
            T_q,
            self.m,
            hecke_primes=tuple(self.hecke),
            slack=self.slack,
            cross_check=False,
        )

    def layer_valuation_profile(self, by: Literal["column", "row"] = "column") -> list[int]:
        """Minimum U-entry valuation over the columns (or rows) of each layer.

        U_p pushes every image towards the low layers, so the row profile is the
        one that grows; column minima stay at the valuation of the first rows.
        """
        profile = []
        for i in range(self.n_levels):
            members = [j for j, layer in enumerate(self.layer_index) if layer == i]
            if by == "row":
                values = (x for r in members for x in self.U.rows[r])
            else:
                values = (row[j] for row in self.U.rows for j in members)
            profile.append(vector_valuation(values, self.ring))
        return profile

    def to_json(self) -> dict[str, Any]:
        return {
            "spec": self.spec.to_json(),
            "n_levels": self.n_levels,
            "m_work": self.m,
            "T_q": self.T_q,
            "dimension": self.dimension,
            "U": self.U.to_json(),
        }


def _solve(
    basis: Sequence[QSeries], coeffs: Sequence[int], ring: ResidueRing, length: int
) -> tuple[list[int], int]:
    q = ring.modulus
    d = len(basis)
    work = [c % q for c in coeffs[:length]]
    vector = [0] * d
    for j in range(d):
        c = work[j]
        if not c:
            continue
        vector[j] = c
        row = basis[j].coeffs
        for n in range(j, length):
            b = row[n]
            if b:
                work[n] = (work[n] - c * b) % q
    return vector, vector_valuation(work[d:], ring)


def coords(
    sys: KatzSystem, f: QSeries, required: int | None = None, where: str = ""
) -> Coordinates:
    """Coordinates of f through the first d coefficients; the next ``slack`` measure the residual.

    With ``required`` set, a residual valuation below it raises NotInSpaceError.
    """
    length = sys.dimension + sys.slack
    if f.T + 1 < length:
        raise UsageError(f"series known to {f.T} terms; coordinates need {length}")
    series = f.reduce(sys.ring)
    vector, residual = _solve(sys.basis, series.coeffs, sys.ring, length)
    if required is not None and residual < required:
        raise NotInSpaceError(residual, required, where)
    return Coordinates(tuple(vector), residual)


def expand(sys: KatzSystem, vector: Sequence[int]) -> QSeries:
    """Sum of vector[j] * basis[j] as a q-expansion to T_q."""
    if len(vector) != sys.dimension:
        raise UsageError(f"vector of length {len(vector)} for a basis of size {sys.dimension}")
    q = sys.ring.modulus
    total = [0] * (sys.T_q + 1)
    for c, b in zip(vector, sys.basis, strict=True):
        c %= q
        if c:
            for n, x in enumerate(b.coeffs):
                if x:
                    total[n] += c * x
    return QSeries(tuple(x % q for x in total), sys.ring)


def _assemble(
    basis: Sequence[QSeries],
    images: Iterable[QSeries],
    ring: ResidueRing,
    slack: int,
    workers: int,
) -> tuple[ModMatrix, list[int]]:
    length = len(basis) + slack

    def column(image: QSeries) -> tuple[list[int], int]:
        return _solve(basis, image.coeffs, ring, length)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        solved = list(pool.map(column, images))
    return (
        ModMatrix.from_columns([c for c, _ in solved], ring),
        [v for _, v in solved],
    )


def _check_prime(spec: CMSpec, ell: int) -> None:
    if (spec.N * spec.prime) % ell == 0:
        raise UsageError(f"T_{ell} needs l coprime to Np = {spec.N * spec.prime}")


def _hecke(
    spec: CMSpec,
    basis: Sequence[QSeries],
    ell: int,
    ring: ResidueRing,
    slack: int,
    workers: int,
) -> tuple[ModMatrix, tuple[int, ...]]:
    """T_l matrix with the residual valuation of every column."""
    _check_prime(spec, ell)
    images = (hecke_coeff_transform(b, ell, spec.k, spec.chi_ell(ell)) for b in basis)
    matrix, residuals = _assemble(basis, images, ring, slack, workers)
    _certified(residuals, ring, f"T_{ell}")
    return matrix, tuple(residuals)


def _certified(residuals: Sequence[int], ring: ResidueRing, operator: str) -> int:
    """Worst column residual; an image that leaves the span mod p raises NotInSpaceError."""
    if not residuals:
        return ring.m
    worst = min(range(len(residuals)), key=lambda j: residuals[j])
    if residuals[worst] < 1:
        raise NotInSpaceError(residuals[worst], 1, where=f"{operator} column {worst}")
    return residuals[worst]


def _cross_check(
    spec: CMSpec, monomials: list[QSeries], layer_sizes: list[int], T: int
) -> None:
    """Layers 0 and 1 against the Eisenstein-product bases over the rationals."""
    p = spec.prime
    w0, w1 = spec.k, spec.k + p - 1
    lower = space_basis(spec.N, w0, T)
    upper = space_basis(spec.N, w1, T)
    E = level_one_eisenstein(p - 1, T)
    complement = complement_basis(lower, [mul(b, E) for b in lower.basis], upper, p=p)
    if lower.dimension != layer_sizes[0] or len(complement) != layer_sizes[1]:
        raise ConsistencyError(
            f"layer sizes {layer_sizes[:2]} disagree with classical dimensions "
            f"{lower.dimension}, {len(complement)}"
        )
    for index, monomial in enumerate(monomials):
        target = lower if index < layer_sizes[0] else upper
        if not target.contains(monomial.truncate(T)):
            raise ConsistencyError(f"Miller monomial {index} is not in M_{target.w}")


def build_katz(
    spec: CMSpec,
    n_levels: int,
    T_q: int,
    m_work: int,
    hecke_primes: Sequence[int] = (),
    slack: int = DEFAULT_SLACK,
    cross_check: bool = True,
    workers: int = 1,
) -> KatzSystem:
    """Katz basis with layers 0..n_levels-1 over Z/p^m_work, with U_p and T_l matrices."""
    p = spec.prime
    d = katz_dimension(spec, n_levels)
    needed = max([p, *hecke_primes]) * (d + slack)
    if T_q < needed:
        raise UsageError(f"T_q={T_q} too small: operators need {needed} terms")
    ring = ResidueRing(p, m_work)

    E = level_one_eisenstein(p - 1, T_q).reduce(ring)
    if E.coeffs[0] != 1 or any(c % p for c in E.coeffs[1:]):
        raise ConsistencyError(f"E_{p - 1} is not congruent to 1 mod {p}")
    E_inverse = E.inverse()

    monomials = MillerMonomials(spec.N, T_q, ring)
    basis: list[QSeries] = []
    layer_index: list[int] = []
    layer_sizes: list[int] = []
    scale = QSeries.one(T_q, ring)
    for i in range(n_levels):
        lower, upper = _layer_bounds(spec, i)
        w = katz_weight(spec, i)
        for j in range(lower, upper):
            basis.append(mul(monomials.monomial(w, j), scale))
            layer_index.append(i)
        layer_sizes.append(upper - lower)
        scale = mul(scale, E_inverse)

    if cross_check and n_levels >= 2:
        T_check = sturm_bound(spec.N, spec.k + p - 1) + slack
        rational = MillerMonomials(spec.N, T_check, RATIONALS)
        _cross_check(
            spec,
            [
                rational.monomial(katz_weight(spec, layer_index[j]), j)
                for j in range(layer_sizes[0] + layer_sizes[1])
            ],
            layer_sizes,
            T_check,
        )

    U, residuals = _assemble(basis, (up_operator(b, p) for b in basis), ring, slack, workers)
    worst = min(range(d), key=lambda j: residuals[j])
    if residuals[worst] < 1:
        raise NotInSpaceError(
            residuals[worst], 1, where=f"U_p column {worst} (layer {layer_index[worst]})"
        )

    hecke: dict[int, ModMatrix] = {}
    hecke_residuals: dict[int, tuple[int, ...]] = {}
    for ell in hecke_primes:
        hecke[ell], hecke_residuals[ell] = _hecke(spec, basis, ell, ring, slack, workers)

    logger.info(
        "katz system built",
        p=p,
        m_work=m_work,
        n_levels=n_levels,
        d=d,
        T_q=T_q,
        residual_valuation=residuals[worst],
        hecke_primes=list(hecke_primes),
    )
    return KatzSystem(
        spec=spec,
        n_levels=n_levels,
        ring=ring,
        T_q=T_q,
        slack=slack,
        basis=tuple(basis),
        layer_index=tuple(layer_index),
        E=E,
        U=U,
        hecke=hecke,
        residual_valuation=residuals[worst],
        hecke_residuals=hecke_residuals,
    )


def up_matrix(sys: KatzSystem) -> ModMatrix:
    return sys.U


def hecke_matrix(sys: KatzSystem, ell: int, workers: int = 1) -> ModMatrix:
    """Matrix of T_l, computed on demand (with a longer truncation when l > p)."""
    if ell in sys.hecke:
        return sys.hecke[ell]
    _check_prime(sys.spec, ell)
    needed = ell * (sys.dimension + sys.slack)
    target = sys.extended(needed) if needed > sys.T_q else sys
    matrix, residuals = _hecke(sys.spec, target.basis, ell, sys.ring, sys.slack, workers)
    logger.debug(
        "hecke matrix built",
        ell=ell,
        T_q=target.T_q,
        residual_valuation=min(residuals, default=sys.m),
    )
    return matrix


def hecke_primes_below(spec: CMSpec, bound: int | None = None) -> tuple[int, ...]:
    """Primes l < bound (default p) with l coprime to Np."""
    limit = spec.prime if bound is None else bound
    return tuple(
        ell
        for ell in primerange(2, limit)
        if (spec.N * spec.prime) % ell
    )
