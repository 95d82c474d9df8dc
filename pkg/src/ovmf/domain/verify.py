"""Predicates over a computed generalized eigenform and the published tables.

Asserted checks decide the exit status of a verification run; informational
checks only report what was measured.
"""
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

from sympy import primerange

from ovmf.domain.cmforms import (
    CMSpec,
    SplitType,
    StabilizedForm,
    hecke_recursion_residual,
    split_type,
)
from ovmf.domain.eigen import (
    Convention,
    GeneralizedEigenData,
    charpoly_at,
    eigen_residual,
    vector_valuation,
)
from ovmf.domain.katz import KatzSystem
from ovmf.domain.padic import ResidueRing, valuation_of_int
from ovmf.domain.qseries import QSeries
from ovmf.infrastructure.logging import get_logger

logger = get_logger(component="verify")


class CheckStatus(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    INFO = "info"


@dataclass(frozen=True)
class Check:
    name: str
    status: CheckStatus
    asserted: bool
    witness: dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.asserted and self.status is CheckStatus.FAIL

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "status": str(self.status),
            "asserted": self.asserted,
            "witness": self.witness,
        }


def _asserted(name: str, ok: bool, witness: dict[str, Any]) -> Check:
    return Check(name, CheckStatus.PASS if ok else CheckStatus.FAIL, True, witness)


def _info(name: str, witness: dict[str, Any]) -> Check:
    return Check(name, CheckStatus.INFO, False, witness)


@dataclass(frozen=True)
class EigenformResult:
    """Everything one pipeline run produces for a CM form and a prime p."""

    spec: CMSpec
    stab: StabilizedForm
    katz: KatzSystem
    eigen: GeneralizedEigenData
    fprime: QSeries
    convention: Convention
    m_target: int
    m_verified: int
    L_max: int
    table: tuple[tuple[int, int], ...]
    precisions: dict[str, int] = field(default_factory=dict)

    @property
    def f(self) -> QSeries:
        return self.stab.f

    @property
    def p(self) -> int:
        return self.spec.prime

    def table_dict(self) -> dict[int, int]:
        return dict(self.table)


def _mod(value: int, p: int, m: int) -> int:
    return value % p**m


def generalized_coefficient(fprime: QSeries, f: QSeries, ell: int) -> int:
    """a_l' = a_l(f') - a_l(f) a_1(f'), the scalar with T_l f' = a_l f' + a_l' f."""
    return int(fprime.coeffs[ell]) - int(f.coeffs[ell]) * int(fprime.coeffs[1])


def coefficient_table(
    fprime: QSeries, f: QSeries, spec: CMSpec, L_max: int, m_out: int
) -> tuple[tuple[int, int], ...]:
    """(l, a_l' mod p^m_out) for primes l <= L_max coprime to Np."""
    p = spec.prime
    bound = min(L_max, fprime.T, f.T)
    return tuple(
        (ell, _mod(generalized_coefficient(fprime, f, ell), p, m_out))
        for ell in primerange(2, bound + 1)
        if (spec.N * p) % ell
    )


def check_ap_vanishing(
    fprime: QSeries, stab: StabilizedForm, m_verified: int, lambda_p: int | None = None
) -> Check:
    p = stab.alpha.p
    a_p = _mod(int(fprime.coeffs[p]) - stab.alpha.value * int(fprime.coeffs[1]), p, m_verified)
    valuation = valuation_of_int(a_p, p, m_verified)
    witness: dict[str, Any] = {
        "p": p,
        "residue": str(a_p),
        "valuation": valuation,
        "required": m_verified,
    }
    if lambda_p is not None:
        witness["kernel_lambda_valuation"] = valuation_of_int(
            _mod(lambda_p, p, m_verified), p, m_verified
        )
    return _asserted("a_p_vanishing", valuation >= m_verified, witness)


def check_split_vanishing(
    fprime: QSeries, f: QSeries, spec: CMSpec, m_verified: int, L_max: int
) -> Check:
    p = spec.prime
    bound = min(L_max, fprime.T)
    valuations: dict[str, int] = {}
    squares: dict[str, int] = {}
    for ell in primerange(2, bound + 1):
        if (spec.N * p) % ell == 0 or split_type(spec, ell) is not SplitType.SPLIT:
            continue
        value = _mod(generalized_coefficient(fprime, f, ell), p, m_verified)
        valuations[str(ell)] = valuation_of_int(value, p, m_verified)
        if ell * ell <= fprime.T:
            square = _mod(generalized_coefficient(fprime, f, ell * ell), p, m_verified)
            squares[str(ell * ell)] = valuation_of_int(square, p, m_verified)
    ok = all(v >= m_verified for v in valuations.values())
    return _asserted(
        "split_vanishing",
        ok,
        {"valuations": valuations, "required": m_verified, "prime_squares": squares},
    )


def check_inert_nonzero(
    fprime: QSeries, f: QSeries, spec: CMSpec, m_verified: int, L_max: int,
    published: Iterable[int] = (),
) -> Check:
    p = spec.prime
    bound = min(L_max, fprime.T)
    valuations: dict[str, int] = {}
    for ell in primerange(2, bound + 1):
        if (spec.N * p) % ell == 0 or split_type(spec, ell) is not SplitType.INERT:
            continue
        value = _mod(generalized_coefficient(fprime, f, ell), p, m_verified)
        valuations[str(ell)] = valuation_of_int(value, p, m_verified)
    listed = [str(ell) for ell in published if str(ell) in valuations]
    return _info(
        "inert_nonzero",
        {
            "valuations": valuations,
            "published_units": all(valuations[ell] == 0 for ell in listed),
            "zeros": [ell for ell, v in valuations.items() if v >= m_verified],
        },
    )


def check_generalized_hecke(
    fprime: QSeries,
    f: QSeries,
    spec: CMSpec,
    m_verified: int,
    L_max: int = 50,
    index_bound: int | None = None,
) -> Check:
    """a_{ln}(f') + chi(l) l^(k-1) a_{n/l}(f') = a_l(f) a_n(f') + a_l' a_n(f) for l <= L_max."""
    p = spec.prime
    q = p**m_verified
    bound = min(fprime.T, f.T) if index_bound is None else index_bound
    per_prime: dict[str, dict[str, Any]] = {}
    worst = m_verified
    for ell in primerange(2, min(L_max, bound) + 1):
        if (spec.N * p) % ell == 0:
            continue
        a_ell = int(f.coeffs[ell])
        a_prime = generalized_coefficient(fprime, f, ell)
        chi = spec.chi_ell(ell)
        residual = m_verified
        agree = True
        n_max = max(1, bound // ell)
        for n in range(1, n_max + 1):
            lhs = int(fprime.coeffs[ell * n])
            if n % ell == 0:
                lhs += chi * int(fprime.coeffs[n // ell])
            rhs = a_ell * int(fprime.coeffs[n]) + a_prime * int(f.coeffs[n])
            residual = min(residual, valuation_of_int((lhs - rhs) % q, p, m_verified))
            f_n = int(f.coeffs[n]) % q
            if f_n % p:
                slot = (lhs - a_ell * int(fprime.coeffs[n])) * pow(f_n, -1, q) % q
                agree = agree and slot == a_prime % q
        worst = min(worst, residual)
        per_prime[str(ell)] = {
            "n_checked": n_max,
            "residual_valuation": residual,
            "slots_agree": agree,
        }
    ok = worst >= m_verified and all(w["slots_agree"] for w in per_prime.values())
    return _asserted(
        "generalized_hecke", ok, {"primes": per_prime, "required": m_verified}
    )


def measure_ef(data: GeneralizedEigenData) -> Check:
    return _info(
        "e_f",
        {
            "e_f_measured": data.e_f_measured,
            "power_ranks": list(data.power_ranks),
            "at_least_two": data.e_f_measured >= 2,
        },
    )


def check_up_eigenform(result: EigenformResult) -> Check:
    """U.coords(f) = alpha.coords(f), a_{pn}(f) = alpha a_n(f), char(U)(alpha) = 0."""
    mv = result.m_verified
    p = result.p
    ring = ResidueRing(p, mv)
    katz = result.katz
    alpha = result.stab.alpha
    matrix_valuation = min(mv, eigen_residual(katz.U, alpha, result.eigen.f_coords))

    f = result.f
    q = p**mv
    series_ok = all(
        (int(f.coeffs[n * p]) - alpha.value * int(f.coeffs[n])) % q == 0
        for n in range(1, f.T // p + 1)
    )
    char_value = charpoly_at(katz.U.reduce(mv), alpha.reduce(mv))
    return _asserted(
        "up_eigenform",
        matrix_valuation >= mv and series_ok and char_value.value == 0,
        {
            "matrix_valuation": matrix_valuation,
            "series_identity": series_ok,
            "charpoly_at_alpha_valuation": ring.valuation(char_value.value),
            "required": mv,
        },
    )


def check_i2_dimension(data: GeneralizedEigenData) -> Check:
    return _asserted(
        "i2_dimension", data.i2_dimension == 2, {"dimension": data.i2_dimension}
    )


def check_hecke_commutation(result: EigenformResult) -> Check:
    """[U, T_l] vanishes on the I^2-eigenspace."""
    mv = result.m_verified
    U = result.katz.U
    ring = U.ring
    valuations: dict[str, int] = {}
    for ell, T in sorted(result.katz.hecke.items()):
        worst = mv
        for x in result.eigen.space:
            ut = U.apply(T.apply(x))
            tu = T.apply(U.apply(x))
            worst = min(worst, vector_valuation((a - b for a, b in zip(ut, tu, strict=True)), ring))
        valuations[str(ell)] = worst
    return _asserted(
        "hecke_commutation",
        all(v >= mv for v in valuations.values()),
        {"valuations": valuations, "required": mv},
    )


def check_nebentypus(spec: CMSpec, g0: QSeries, bound: int = 50) -> Check:
    """The Hecke recursion of g0 holds with chi_K and fails with -chi_K."""
    with_chi = hecke_recursion_residual(g0, spec, sign=1, bound=bound)
    with_minus = hecke_recursion_residual(g0, spec, sign=-1, bound=bound)
    return _asserted(
        "nebentypus",
        with_chi == 0 and with_minus > 0,
        {"failures_with_chi": with_chi, "failures_with_minus_chi": with_minus},
    )


def check_stability(result: EigenformResult, rerun: EigenformResult | None) -> Check:
    """The emitted residues agree mod p^m_target after deepening and raising precision."""
    if rerun is None:
        return _info("stability", {"skipped": True})
    p, m = result.p, result.m_target
    base, deeper = result.table_dict(), rerun.table_dict()
    differing = [
        str(ell)
        for ell, value in base.items()
        if ell in deeper and _mod(value - deeper[ell], p, m) != 0
    ]
    return _asserted(
        "stability",
        not differing,
        {
            "n_levels": [result.katz.n_levels, rerun.katz.n_levels],
            "m_work": [result.katz.m, rerun.katz.m],
            "differing": differing,
        },
    )


@dataclass(frozen=True)
class PublishedExample:
    """A published configuration with its residue table and CM fixtures."""

    number: int
    D: int
    k: int
    p: int
    m: int
    table: dict[int, int]
    g0_fixture: dict[int, int]
    note: str = ""

    @property
    def spec(self) -> CMSpec:
        return CMSpec(self.D, self.k, self.p, self.m)


PUBLISHED_EXAMPLES: dict[int, PublishedExample] = {
    1: PublishedExample(
        number=1,
        D=-4,
        k=5,
        p=5,
        m=24,
        table={
            3: 43300771101273669,
            7: 43442244692236520,
            11: 30279465837717252,
            19: 11784730043200626,
            23: 56240881617036337,
            31: 18613606380354261,
            43: 39991538540718615,
            47: 53268861392126849,
            59: 35400357120186448,
            67: 31496794802809616,
            71: 10538304364997549,
            79: 19184781428210594,
            83: 24773813366422376,
        },
        g0_fixture={1: 1, 2: -4, 4: 16, 5: -14, 8: -64, 9: 81},
    ),
    2: PublishedExample(
        number=2,
        D=-3,
        k=7,
        p=7,
        m=22,
        table={
            5: 666108372229480561,
            11: 88592821880322831,
            17: 2092810930868948813,
            23: 1330989883549587564,
            29: 948498584988948579,
            41: 254724600121344265,
            47: 524234543371386261,
            53: 1745806937126778885,
            59: 3656628657475311802,
            71: 903737885018479401,
            83: 2252941180864123161,
            89: 2944581429297441793,
        },
        g0_fixture={1: 1, 3: -27, 4: 64, 7: -286, 9: 729},
        note="the prose states the precision as 5^22; the table header reads 7^22",
    ),
}


def check_table(result: EigenformResult, example: PublishedExample) -> Check:
    p = example.p
    m = min(result.m_verified, example.m)
    computed = result.table_dict()
    diffs: dict[str, dict[str, Any]] = {}
    for ell, published in sorted(example.table.items()):
        value = computed.get(ell)
        if value is None:
            diffs[str(ell)] = {"missing": True}
            continue
        difference = _mod(value - published, p, m)
        if difference:
            diffs[str(ell)] = {
                "computed": str(_mod(value, p, m)),
                "published": str(_mod(published, p, m)),
                "valuation": valuation_of_int(difference, p, m),
            }
    witness: dict[str, Any] = {
        "example": example.number,
        "compared_mod": f"{p}^{m}",
        "convention": str(result.convention),
        "mismatches": diffs,
    }
    if example.note:
        witness["note"] = example.note
    return _asserted("published_table", not diffs, witness)


def check_cm_fixture(g0: QSeries, example: PublishedExample) -> Check:
    mismatches = {
        str(n): str(g0.coeffs[n]) for n, a in example.g0_fixture.items() if g0.coeffs[n] != a
    }
    return _asserted("cm_fixture", not mismatches, {"mismatches": mismatches})


@dataclass(frozen=True)
class VerificationReport:
    config: dict[str, Any]
    m_verified: int
    e_f: int
    table: tuple[tuple[int, int], ...]
    checks: tuple[Check, ...]
    p: int
    m_out: int

    @property
    def passed(self) -> bool:
        return not any(check.failed for check in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_json(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "m_verified": self.m_verified,
            "e_f": self.e_f,
            "table": [{"l": ell, "value": str(value)} for ell, value in self.table],
            "checks": [check.to_json() for check in self.checks],
            "passed": self.passed,
        }


def run_checks(
    result: EigenformResult,
    rerun: EigenformResult | None = None,
    example: PublishedExample | None = None,
    hecke_bound: int = 50,
    workers: int = 1,
) -> list[Check]:
    """All checks for one result, in a fixed order regardless of ``workers``."""
    mv = result.m_verified
    spec = result.spec
    tasks: list[Callable[[], Check]] = [
        lambda: check_nebentypus(spec, result.stab.g0),
        lambda: check_up_eigenform(result),
        lambda: check_i2_dimension(result.eigen),
        lambda: check_hecke_commutation(result),
        lambda: check_ap_vanishing(result.fprime, result.stab, mv, result.eigen.lambda_p),
        lambda: check_split_vanishing(result.fprime, result.f, spec, mv, result.L_max),
        lambda: check_inert_nonzero(
            result.fprime, result.f, spec, mv, result.L_max,
            example.table if example else (),
        ),
        lambda: check_generalized_hecke(
            result.fprime, result.f, spec, mv, hecke_bound, result.katz.dimension - 1
        ),
        lambda: measure_ef(result.eigen),
        lambda: check_stability(result, rerun),
    ]
    if example is not None:
        tasks.append(lambda: check_cm_fixture(result.stab.g0, example))
        tasks.append(lambda: check_table(result, example))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        checks = list(pool.map(lambda task: task(), tasks))
    logger.info(
        "checks completed",
        total=len(checks),
        failed=[c.name for c in checks if c.failed],
    )
    return checks


def build_report(
    result: EigenformResult, checks: Sequence[Check], config: dict[str, Any]
) -> VerificationReport:
    return VerificationReport(
        config=config,
        m_verified=result.m_verified,
        e_f=result.eigen.e_f_measured,
        table=result.table,
        checks=tuple(checks),
        p=result.p,
        m_out=result.m_target,
    )


def reproduce_table(
    example: PublishedExample,
    compute: Callable[[PublishedExample, Convention], EigenformResult],
    rerun: Callable[[EigenformResult], EigenformResult | None] | None = None,
    workers: int = 1,
) -> VerificationReport:
    """Recompute a published table; fall back to the unsubtracted scaling if it mismatches."""
    result = compute(example, Convention.TABLE)
    if check_table(result, example).failed:
        logger.warning(
            "table mismatch under subtracted normalization, trying unsubtracted",
            example=example.number,
        )
        fallback = compute(example, Convention.TABLE_UNSUBTRACTED)
        if not check_table(fallback, example).failed:
            result = fallback
    deeper = rerun(result) if rerun is not None else None
    checks = run_checks(result, deeper, example, workers=workers)
    config = {
        "paper_example": example.number,
        **example.spec.to_json(),
        "convention": str(result.convention),
        "n_levels": result.katz.n_levels,
        "T_q": result.katz.T_q,
        "m_work": result.katz.m,
    }
    return build_report(result, checks, config)


def render_text(report: VerificationReport) -> str:
    """Two-column table of the non-zero a_l' followed by the check summary."""
    config = report.config
    header = f"l | a_l' mod {report.p}^{report.m_out}"
    lines = [
        f"D={config.get('D')} k={config.get('k')} p={report.p} "
        f"m_verified={report.m_verified} e_f={report.e_f}",
        header,
        "-" * len(header),
    ]
    width = max((len(str(ell)) for ell, _ in report.table), default=1)
    lines.extend(
        f"{ell:>{width}} | {value}" for ell, value in report.table if value != 0
    )
    if report.checks:
        lines.append("")
        lines.extend(
            f"[{check.status}] {check.name}" + ("" if check.asserted else " (info)")
            for check in report.checks
        )
    return "\n".join(lines) + "\n"
