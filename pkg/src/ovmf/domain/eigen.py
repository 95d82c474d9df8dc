"""Linear algebra over Z/p^m and extraction of the generalized eigenform.

Z/p^m is a chain ring, so the Howell normal form plays the role that reduced
row echelon form plays over a field: it is canonical, it preserves the row
span and every element of the span whose first j entries vanish is a
combination of the rows pivoting at or after column j. Kernels, free parts
and the I^2-eigenspace are all read off Howell forms.
"""
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Any

from ovmf.domain.errors import (
    EigenspaceError,
    NormalizationError,
    UsageError,
)
from ovmf.domain.padic import ResidueInt, ResidueRing, valuation_of_int
from ovmf.domain.qseries import QSeries
from ovmf.infrastructure.logging import get_logger

if TYPE_CHECKING:
    from ovmf.domain.katz import KatzSystem

logger = get_logger(component="eigen")

Vector = tuple[int, ...]

MAX_POWER = 6


@dataclass(frozen=True, slots=True)
class ModMatrix:
    """A matrix over Z/p^m stored as rows of canonical integers."""

    rows: tuple[Vector, ...]
    ring: ResidueRing
    ncols: int

    @classmethod
    def from_rows(
        cls, rows: Iterable[Sequence[int]], ring: ResidueRing, ncols: int | None = None
    ) -> "ModMatrix":
        q = ring.modulus
        reduced = tuple(tuple(int(x) % q for x in row) for row in rows)
        width = ncols if ncols is not None else (len(reduced[0]) if reduced else 0)
        if any(len(row) != width for row in reduced):
            raise UsageError("rows of a matrix must share one length")
        return cls(reduced, ring, width)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]], ring: ResidueRing) -> "ModMatrix":
        if not columns:
            return cls((), ring, 0)
        return cls.from_rows(zip(*columns, strict=True), ring, len(columns))

    @classmethod
    def identity(cls, n: int, ring: ResidueRing) -> "ModMatrix":
        return cls.from_rows(
            ([1 if i == j else 0 for j in range(n)] for i in range(n)), ring, n
        )

    @classmethod
    def zero(cls, nrows: int, ncols: int, ring: ResidueRing) -> "ModMatrix":
        return cls(tuple((0,) * ncols for _ in range(nrows)), ring, ncols)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def entry(self, i: int, j: int) -> ResidueInt:
        return ResidueInt(self.rows[i][j], self.ring.p, self.ring.m)

    def column(self, j: int) -> Vector:
        return tuple(row[j] for row in self.rows)

    def _same_ring(self, other: "ModMatrix") -> None:
        if self.ring != other.ring:
            raise UsageError(f"mismatched rings {self.ring!r} and {other.ring!r}")

    def __add__(self, other: "ModMatrix") -> "ModMatrix":
        self._same_ring(other)
        if self.shape != other.shape:
            raise UsageError(f"shapes {self.shape} and {other.shape} differ")
        return ModMatrix.from_rows(
            (
                [a + b for a, b in zip(r, s, strict=True)]
                for r, s in zip(self.rows, other.rows, strict=True)
            ),
            self.ring,
            self.ncols,
        )

    def __sub__(self, other: "ModMatrix") -> "ModMatrix":
        return self + other.scale(-1)

    def __matmul__(self, other: "ModMatrix") -> "ModMatrix":
        self._same_ring(other)
        if self.ncols != other.nrows:
            raise UsageError(f"cannot multiply {self.shape} by {other.shape}")
        columns = list(zip(*other.rows, strict=True)) if other.rows else []
        q = self.ring.modulus
        return ModMatrix(
            tuple(
                tuple(sum(a * b for a, b in zip(row, col, strict=True)) % q for col in columns)
                for row in self.rows
            ),
            self.ring,
            other.ncols,
        )

    def scale(self, c: int | ResidueInt) -> "ModMatrix":
        factor = int(c)
        return ModMatrix.from_rows(
            ([factor * x for x in row] for row in self.rows), self.ring, self.ncols
        )

    def shift(self, c: int | ResidueInt) -> "ModMatrix":
        """self - c*I."""
        if self.nrows != self.ncols:
            raise UsageError("shift needs a square matrix")
        factor = int(c)
        return ModMatrix.from_rows(
            (
                [x - factor if i == j else x for j, x in enumerate(row)]
                for i, row in enumerate(self.rows)
            ),
            self.ring,
            self.ncols,
        )

    def power(self, exponent: int) -> "ModMatrix":
        if exponent < 0:
            raise UsageError("matrix powers need a non-negative exponent")
        result = ModMatrix.identity(self.nrows, self.ring)
        base = self
        while exponent:
            if exponent & 1:
                result = result @ base
            exponent >>= 1
            if exponent:
                base = base @ base
        return result

    def transpose(self) -> "ModMatrix":
        if not self.rows:
            return ModMatrix.zero(self.ncols, 0, self.ring)
        return ModMatrix(tuple(zip(*self.rows, strict=True)), self.ring, self.nrows)

    def apply(self, vector: Sequence[int]) -> Vector:
        if len(vector) != self.ncols:
            raise UsageError(f"vector of length {len(vector)} for {self.ncols} columns")
        q = self.ring.modulus
        return tuple(sum(a * b for a, b in zip(row, vector, strict=True)) % q for row in self.rows)

    def vstack(self, *others: "ModMatrix") -> "ModMatrix":
        rows = list(self.rows)
        for other in others:
            self._same_ring(other)
            if other.ncols != self.ncols:
                raise UsageError("vstack needs equal column counts")
            rows.extend(other.rows)
        return ModMatrix(tuple(rows), self.ring, self.ncols)

    def hstack(self, *others: "ModMatrix") -> "ModMatrix":
        for other in others:
            self._same_ring(other)
            if other.nrows != self.nrows:
                raise UsageError("hstack needs equal row counts")
        rows = tuple(
            sum((other.rows[i] for other in others), start=row) for i, row in enumerate(self.rows)
        )
        return ModMatrix(rows, self.ring, self.ncols + sum(o.ncols for o in others))

    def reduce(self, m: int) -> "ModMatrix":
        if m > self.ring.m:
            raise UsageError(f"cannot raise precision from {self.ring.m} to {m}")
        return ModMatrix.from_rows(self.rows, self.ring.with_precision(m), self.ncols)

    def valuation(self) -> int:
        """Minimum entry valuation (m for the zero matrix)."""
        return vector_valuation((x for row in self.rows for x in row), self.ring)

    def is_zero(self) -> bool:
        return all(x == 0 for row in self.rows for x in row)

    def determinant(self) -> ResidueInt:
        return determinant(self)

    def to_json(self) -> dict[str, Any]:
        return {
            "p": self.ring.p,
            "m": self.ring.m,
            "shape": list(self.shape),
            "rows": [[str(x) for x in row] for row in self.rows],
        }


def vector_valuation(values: Iterable[int], ring: ResidueRing) -> int:
    return min(
        (valuation_of_int(x % ring.modulus, ring.p, ring.m) for x in values), default=ring.m
    )


def howell_form(M: ModMatrix) -> ModMatrix:
    """Howell normal form: pivots p^v in increasing columns, entries above reduced mod p^v.

    The result has at least as many rows as M (zero rows pad the bottom).
    """
    ring = M.ring
    p, m, q = ring.p, ring.m, ring.modulus
    work = [list(row) for row in M.rows if any(row)]
    pivots: list[tuple[int, int, list[int]]] = []

    for col in range(M.ncols):
        candidates = [r for r in work if r[col]]
        if not candidates:
            continue
        row = min(candidates, key=lambda r: valuation_of_int(r[col], p, m))
        work.remove(row)
        v = valuation_of_int(row[col], p, m)
        unit = row[col] // p**v
        inv = pow(unit, -1, q)
        row = [x * inv % q for x in row]
        pivot_value = p**v

        for other in work:
            c = other[col]
            if c:
                factor = c // pivot_value
                other[:] = [(a - factor * b) % q for a, b in zip(other, row, strict=True)]
        for _, _, upper in pivots:
            c = upper[col]
            if c >= pivot_value:
                factor = c // pivot_value
                upper[:] = [(a - factor * b) % q for a, b in zip(upper, row, strict=True)]

        if v:
            saturated = [x * p ** (m - v) % q for x in row]
            if any(saturated):
                work.append(saturated)
        pivots.append((col, v, row))
        work = [r for r in work if any(r)]

    rows = [tuple(row) for _, _, row in pivots]
    rows.extend([(0,) * M.ncols] * max(0, M.nrows - len(rows)))
    return ModMatrix(tuple(rows), ring, M.ncols)


def howell_basis(vectors: Iterable[Sequence[int]], ring: ResidueRing, ncols: int) -> list[Vector]:
    """Nonzero rows of the Howell form of the module generated by ``vectors``."""
    rows = list(vectors)
    if not rows:
        return []
    form = howell_form(ModMatrix.from_rows(rows, ring, ncols))
    return [row for row in form.rows if any(row)]


def pivot_column(vector: Sequence[int]) -> int | None:
    for j, x in enumerate(vector):
        if x:
            return j
    return None


def kernel_mod_pm(M: ModMatrix) -> list[Vector]:
    """Howell basis of {v : M v = 0 mod p^m}, read off the Howell form of [M^T | I]."""
    n = M.ncols
    augmented = M.transpose().hstack(ModMatrix.identity(n, M.ring))
    width = M.nrows
    form = howell_form(augmented)
    return [
        tuple(row[width:])
        for row in form.rows
        if not any(row[:width]) and any(row[width:])
    ]


@dataclass(frozen=True)
class FreePart:
    """Free generators of a submodule and the valuation of what is left over."""

    generators: tuple[Vector, ...]
    pivots: tuple[int, ...]
    torsion_valuation: int

    @property
    def rank(self) -> int:
        return len(self.generators)


def free_part(
    generators: Iterable[Sequence[int]], ring: ResidueRing, width: int | None = None
) -> FreePart:
    """Split off a free submodule by unit-pivot elimination on the first ``width`` entries.

    The remaining generators are divisible by p^s on those entries; s is the
    precision to which the submodule is free of the returned rank.
    """
    q = ring.modulus
    rows = [list(g) for g in generators]
    if not rows:
        return FreePart((), (), ring.m)
    span = width if width is not None else len(rows[0])
    free: list[list[int]] = []
    pivots: list[int] = []

    while True:
        found = None
        for r_index, row in enumerate(rows):
            for col in range(span):
                if row[col] % ring.p:
                    found = (r_index, col)
                    break
            if found:
                break
        if found is None:
            break
        r_index, col = found
        row = rows.pop(r_index)
        inv = pow(row[col], -1, q)
        row = [x * inv % q for x in row]
        for other in rows + free:
            c = other[col]
            if c:
                other[:] = [(a - c * b) % q for a, b in zip(other, row, strict=True)]
        free.append(row)
        pivots.append(col)

    torsion = vector_valuation((x for row in rows for x in row[:span]), ring)
    return FreePart(tuple(tuple(r) for r in free), tuple(pivots), torsion)


def determinant(M: ModMatrix) -> ResidueInt:
    """Exact determinant mod p^m by elimination on minimal-valuation pivots."""
    if M.nrows != M.ncols:
        raise UsageError("determinant needs a square matrix")
    ring = M.ring
    p, m, q = ring.p, ring.m, ring.modulus
    a = [list(row) for row in M.rows]
    n = M.nrows
    det, sign = 1, 1

    for k in range(n):
        best = None
        best_v = m
        for i in range(k, n):
            for j in range(k, n):
                if a[i][j]:
                    v = valuation_of_int(a[i][j], p, m)
                    if v < best_v:
                        best, best_v = (i, j), v
                        if v == 0:
                            break
            if best_v == 0:
                break
        if best is None:
            return ring.zero
        i, j = best
        if i != k:
            a[i], a[k] = a[k], a[i]
            sign = -sign
        if j != k:
            for row in a:
                row[j], row[k] = row[k], row[j]
            sign = -sign
        pivot = a[k][k]
        pivot_value = p**best_v
        inv = pow(pivot // pivot_value, -1, q)
        for i in range(k + 1, n):
            c = a[i][k]
            if c:
                factor = (c // pivot_value) * inv % q
                a[i] = [(x - factor * y) % q for x, y in zip(a[i], a[k], strict=True)]
        det = det * pivot % q
        if det == 0:
            return ring.zero
    return ring(sign * det)


def charpoly_at(U: ModMatrix, alpha: ResidueInt | int) -> ResidueInt:
    """det(alpha*I - U), i.e. the characteristic polynomial of U evaluated at alpha."""
    return determinant(U.scale(-1).shift(-int(alpha)))




HeckePair = tuple[ModMatrix, ResidueInt | int]


@dataclass(frozen=True)
class GeneralizedEigenData:
    """The I^2-eigenspace at f and the data extracted from it.

    Coordinates live in Z/p^m_system, the precision to which f satisfies the
    truncated eigen-relations; m_verified additionally accounts for the
    torsion of the computed kernel.
    """

    alpha: ResidueInt
    space: tuple[Vector, ...]
    e_f_measured: int
    power_ranks: tuple[int, ...]
    f_coords: Vector
    fprime_coords: Vector
    complement_coords: Vector
    lambda_p: int
    lambda_hecke: tuple[int, ...]
    m_system: int
    m_verified: int
    precisions: dict[str, int] = field(default_factory=dict)

    @property
    def i2_dimension(self) -> int:
        return len(self.space)

    @property
    def ring(self) -> ResidueRing:
        return ResidueRing(self.alpha.p, self.m_system)


def _i2_system(
    U: ModMatrix, alpha: ResidueInt | int, hecke: Sequence[HeckePair], f_coords: Vector
) -> ModMatrix:
    """[U - alpha | -f | 0 ...; T_l - a_l | 0 | -f ...] acting on (x, lambda_p, lambda_l...)."""
    blocks = [U.shift(alpha)] + [T.shift(a) for T, a in hecke]
    n_extra = len(blocks)
    rows: list[list[int]] = []
    for b_index, block in enumerate(blocks):
        for i, row in enumerate(block.rows):
            extra = [0] * n_extra
            extra[b_index] = -f_coords[i]
            rows.append(list(row) + extra)
    return ModMatrix.from_rows(rows, U.ring, U.ncols + n_extra)


def i2_space(
    U: ModMatrix, alpha: ResidueInt | int, hecke: Sequence[HeckePair], f_coords: Vector
) -> tuple[FreePart, list[Vector]]:
    """Free part of {x : (U - alpha)x, (T_l - a_l)x in span(f)} and the raw kernel.

    Kernel vectors carry, after the coordinates of x, the scalars lambda with
    (U - alpha)x = lambda_p f and (T_l - a_l)x = lambda_l f.
    """
    kernel = kernel_mod_pm(_i2_system(U, alpha, hecke, f_coords))
    return free_part(kernel, U.ring, width=U.ncols), kernel


def measure_generalized_rank(
    U: ModMatrix, alpha: ResidueInt | int, hecke: Sequence[HeckePair], max_power: int = MAX_POWER
) -> tuple[int, list[int]]:
    """Free rank of ker (U - alpha)^j cap ker (T_l - a_l)^2 for j = 1, 2, ... until stable."""
    shifted = U.shift(alpha)
    conditions = [T.shift(a).power(2) for T, a in hecke]
    ranks: list[int] = []
    current = shifted
    for j in range(1, max_power + 1):
        rank = free_part(kernel_mod_pm(current.vstack(*conditions)), U.ring).rank
        ranks.append(rank)
        if j >= 2 and ranks[-1] == ranks[-2]:
            break
        current = current @ shifted
    return ranks[-1], ranks


def eigen_residual(M: ModMatrix, eigenvalue: ResidueInt | int, x: Sequence[int]) -> int:
    """Valuation of M x - eigenvalue * x."""
    image = M.apply(x)
    c = int(eigenvalue)
    return vector_valuation((a - c * b for a, b in zip(image, x, strict=True)), M.ring)


def column_weighted_residual(
    vectors: Iterable[Sequence[int]],
    column_residuals: Sequence[Sequence[int]],
    ring: ResidueRing,
) -> int:
    """Precision of M x for every x, when column j of each M is only known mod p^res_j.

    Column j contributes res_j + v(x_j); columns where x vanishes contribute nothing.
    """
    bound = ring.m
    for x in vectors:
        for residuals in column_residuals:
            width = len(residuals)
            for res, c in zip(residuals, x[:width], strict=True):
                c %= ring.modulus
                if c:
                    bound = min(bound, res + valuation_of_int(c, ring.p, ring.m))
    return bound


def generalized_eigenspace(
    U: ModMatrix,
    alpha: ResidueInt,
    hecke: Sequence[HeckePair],
    f_coords: Sequence[int],
    precision_floor: int | None = None,
    column_residuals: Sequence[Sequence[int]] = (),
) -> GeneralizedEigenData:
    """I^2-eigenspace at f, the complement generator f' and the certified precision.

    ``column_residuals`` holds, per Hecke pair, the residual valuation of each matrix
    column; the I^2 vectors then certify only as far as the columns they use.
    """
    d = U.ncols
    f_vec = tuple(int(x) % U.ring.modulus for x in f_coords)
    f_pivot = pivot_column(f_vec)
    if f_pivot is None:
        raise EigenspaceError("the eigenform has zero coordinates", [], [])

    precisions = {"u_eigenvector": eigen_residual(U, alpha, f_vec)}
    for index, (T, a) in enumerate(hecke):
        precisions[f"hecke_{index}_eigenvector"] = eigen_residual(T, a, f_vec)
    if precision_floor is not None:
        precisions["floor"] = precision_floor
    m_system = min(U.ring.m, *precisions.values())
    if m_system < 1:
        raise EigenspaceError(
            "the eigenform relations fail already mod p", [], list(precisions.values())
        )

    U_s = U.reduce(m_system)
    ring = U_s.ring
    alpha_s = alpha.reduce(m_system)
    hecke_s = [(T.reduce(m_system), int(a) % ring.modulus) for T, a in hecke]
    f_s = tuple(x % ring.modulus for x in f_vec)

    free, _ = i2_space(U_s, alpha_s, hecke_s, f_s)
    precisions["kernel_torsion"] = free.torsion_valuation
    m_verified = min(m_system, free.torsion_valuation)
    if column_residuals:
        precisions["hecke_columns"] = column_weighted_residual(
            free.generators, column_residuals, ring
        )
        m_verified = min(m_verified, precisions["hecke_columns"])
    if free.rank < 2:
        raise EigenspaceError(
            f"I^2-eigenspace has free rank {free.rank}; no generalized eigenform",
            [free.rank],
            list(precisions.values()),
        )

    full = howell_basis(free.generators, ring, d + 1 + len(hecke_s))
    candidates = [
        row
        for row in full
        if pivot_column(row[:d]) not in (None, f_pivot) and any(x % ring.p for x in row[:d])
    ]
    if not candidates:
        raise EigenspaceError(
            "no unit complement to f in the I^2-eigenspace", [free.rank], [m_verified]
        )
    chosen = min(candidates, key=lambda row: pivot_column(row[:d]) or 0)
    raw = next(
        (g for g, pivot in zip(free.generators, free.pivots, strict=True) if pivot != f_pivot),
        chosen,
    )

    e_f, power_ranks = measure_generalized_rank(U_s, alpha_s, hecke_s)
    logger.info(
        "generalized eigenspace computed",
        p=ring.p,
        m_system=m_system,
        d=d,
        i2_rank=free.rank,
        e_f=e_f,
        m_verified=m_verified,
    )
    return GeneralizedEigenData(
        alpha=alpha_s,
        space=tuple(tuple(g[:d]) for g in free.generators),
        e_f_measured=e_f,
        power_ranks=tuple(power_ranks),
        f_coords=f_s,
        fprime_coords=tuple(chosen[:d]),
        complement_coords=tuple(raw[:d]),
        lambda_p=chosen[d],
        lambda_hecke=tuple(chosen[d + 1 :]),
        m_system=m_system,
        m_verified=m_verified,
        precisions=precisions,
    )


class Convention(StrEnum):
    """How f' is pinned down inside the I^2-eigenspace."""

    PAPER = "paper"
    TABLE = "table"
    TABLE_UNSUBTRACTED = "table-unsubtracted"


def normalization_index(convention: Convention, smallest_inert: int) -> int:
    return smallest_inert if convention is Convention.PAPER else 2


def normalize_fprime(
    data: GeneralizedEigenData,
    sys: "KatzSystem",
    convention: Convention,
    f: QSeries | None = None,
) -> QSeries:
    """q-expansion of f' over Z/p^m_system.

    Every convention except the unsubtracted one first removes the multiple of
    f that makes a_1' = 0; the designated coefficient (a_2' for the tables,
    a_l0' for the smallest inert prime l0) is then scaled to 1.
    """
    ring = data.ring
    eigenform = (f if f is not None else sys.expand(data.f_coords)).reduce(ring)
    if convention is Convention.TABLE_UNSUBTRACTED:
        series = sys.expand(data.complement_coords).reduce(ring)
    else:
        series = sys.expand(data.fprime_coords).reduce(ring)
        T = min(series.T, eigenform.T)
        series = series.truncate(T) - eigenform.truncate(T).scale(series.coeffs[1])

    index = normalization_index(convention, sys.spec.smallest_inert_prime())
    lead = ResidueInt(series.coeffs[index], ring.p, ring.m)
    if not lead.is_unit():
        raise NormalizationError(index, lead.valuation())
    return series.scale(ring.inverse(lead.value))
