"""Use cases: CM expansions, the generalized eigenform pipeline and its verification."""
from dataclasses import dataclass
from typing import Literal, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator
from sympy import nextprime
from tenacity import (
    RetryCallState,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
)

from ovmf.domain.cmforms import (
    CMSpec,
    StabilizedForm,
    assumption_report,
    cm_qexpansion,
    stabilize,
)
from ovmf.domain.eigen import Convention, generalized_eigenspace, normalize_fprime
from ovmf.domain.errors import (
    EigenspaceError,
    InsufficientPrecisionError,
    NotInSpaceError,
    UsageError,
)
from ovmf.domain.katz import (
    auto_levels,
    auto_truncation,
    build_katz,
    hecke_primes_below,
)
from ovmf.domain.ports.metrics import MetricsPort
from ovmf.domain.qseries import QSeries
from ovmf.domain.verify import (
    PUBLISHED_EXAMPLES,
    EigenformResult,
    PublishedExample,
    VerificationReport,
    build_report,
    check_stability,
    coefficient_table,
    reproduce_table,
    run_checks,
)
from ovmf.infrastructure.config import Settings, get_settings
from ovmf.infrastructure.logging import get_logger
from ovmf.infrastructure.observability.stage_tracker import StageTracker

logger = get_logger(component="pipeline")

PRECISION_ERRORS = (InsufficientPrecisionError, EigenspaceError, NotInSpaceError)


class RunConfig(BaseModel):
    """Per-invocation configuration; ``auto`` values are resolved by the pipeline."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    D: int
    k: int
    p: int | None = None
    m_target: int = Field(default=1, ge=1)
    n_levels: int | Literal["auto"] = "auto"
    T_q: int | Literal["auto"] = "auto"
    terms: int = Field(default=10, ge=1)
    convention: Convention = Convention.TABLE
    L_max: int = Field(default=100, ge=2)
    format: Literal["json", "csv", "text"] = "json"

    @model_validator(mode="after")
    def validate_configuration(self) -> Self:
        """Reject unusable (D, k, p) before any computation."""
        self.spec()
        if isinstance(self.n_levels, int) and self.n_levels < 1:
            raise ValueError(f"n_levels must be positive (got {self.n_levels})")
        if isinstance(self.T_q, int) and self.T_q < 1:
            raise ValueError(f"T_q must be positive (got {self.T_q})")
        return self

    def spec(self) -> CMSpec:
        return CMSpec(self.D, self.k, self.p, self.m_target)

    def echo(self) -> dict[str, object]:
        return self.model_dump(mode="json")


def example_config(
    example: PublishedExample, convention: Convention = Convention.TABLE, L_max: int = 100
) -> RunConfig:
    return RunConfig(
        D=example.D,
        k=example.k,
        p=example.p,
        m_target=example.m,
        convention=convention,
        L_max=L_max,
    )


@dataclass(frozen=True)
class CMFormResult:
    """g0 and, when a prime was given, its critical stabilization."""

    spec: CMSpec
    g0: QSeries
    stab: StabilizedForm | None = None

    def assumptions(self) -> dict[str, object] | None:
        return None if self.stab is None else assumption_report(self.spec, self.stab)


def compute_cm_form(config: RunConfig, metrics: MetricsPort | None = None) -> CMFormResult:
    spec = config.spec()
    tracker = StageTracker(metrics, config.p)
    with tracker.stage("cm_form"):
        g0 = cm_qexpansion(spec, config.terms)
    if config.p is None:
        return CMFormResult(spec, g0)
    if config.p > config.terms:
        raise UsageError(f"--terms must reach p={config.p} to read off a_p")
    with tracker.stage("stabilize"):
        stab = stabilize(spec, g0, max(config.m_target, spec.k))
    return CMFormResult(spec, g0, stab)


def _hecke_primes(spec: CMSpec) -> tuple[int, ...]:
    primes = hecke_primes_below(spec)
    if primes:
        return primes
    ell = nextprime(spec.prime)
    while (spec.N * spec.prime) % ell == 0:
        ell = nextprime(ell)
    return (int(ell),)


def compute_eigenform(
    config: RunConfig,
    settings: Settings,
    tracker: StageTracker,
    buffer: int,
    extra_levels: int = 0,
    extra_precision: int = 0,
) -> EigenformResult:
    """One pass of the pipeline at a fixed working precision."""
    spec = config.spec()
    p = spec.prime
    m_work = max(config.m_target + buffer, spec.k) + extra_precision
    n_levels = (
        auto_levels(m_work, p, spec.k) if config.n_levels == "auto" else config.n_levels
    ) + extra_levels
    primes = _hecke_primes(spec)
    slack = settings.hecke_slack
    T_q = (
        auto_truncation(spec, n_levels, slack, max(primes))
        if config.T_q == "auto"
        else config.T_q
    )
    T_q = max(T_q, config.L_max)
    logger.info(
        "pipeline pass",
        D=spec.D,
        k=spec.k,
        p=p,
        m_target=config.m_target,
        m_work=m_work,
        n_levels=n_levels,
        T_q=T_q,
        hecke_primes=list(primes),
    )

    with tracker.stage("cm_form"):
        g0 = cm_qexpansion(spec, T_q)
    with tracker.stage("stabilize"):
        stab = stabilize(spec, g0, m_work)
    with tracker.stage("katz_basis"):
        katz = build_katz(
            spec, n_levels, T_q, m_work, primes, slack=slack, workers=settings.threads
        )
    f_coords = katz.coords(stab.f)
    hecke = [(katz.hecke[ell], stab.f[ell]) for ell in primes]

    with tracker.stage("eigenspace"):
        eigen = generalized_eigenspace(
            katz.U,
            stab.alpha,
            hecke,
            f_coords.vector,
            precision_floor=min(katz.residual_valuation, f_coords.residual_valuation),
            column_residuals=[katz.hecke_residuals[ell] for ell in primes],
        )
    if eigen.m_verified < config.m_target:
        raise InsufficientPrecisionError(eigen.m_verified, config.m_target)

    with tracker.stage("normalize"):
        fprime = normalize_fprime(eigen, katz, config.convention, stab.f)
    table = coefficient_table(fprime, stab.f, spec, config.L_max, config.m_target)
    return EigenformResult(
        spec=spec,
        stab=stab,
        katz=katz,
        eigen=eigen,
        fprime=fprime,
        convention=config.convention,
        m_target=config.m_target,
        m_verified=eigen.m_verified,
        L_max=config.L_max,
        table=table,
        precisions={
            **eigen.precisions,
            "buffer": buffer,
            "m_work": m_work,
            "u_residual": katz.residual_valuation,
            "hecke_residual": katz.operator_residual,
            "f_residual": f_coords.residual_valuation,
        },
    )


def _log_escalation(state: RetryCallState) -> None:
    error = state.outcome.exception() if state.outcome else None
    logger.warning(
        "precision escalation",
        attempt=state.attempt_number,
        error=str(error),
        details=error.details() if hasattr(error, "details") else {},
    )


def run_pipeline(
    config: RunConfig,
    settings: Settings | None = None,
    metrics: MetricsPort | None = None,
) -> EigenformResult:
    """Compute f' and its table, raising the precision buffer while certification falls short."""
    settings = settings or get_settings()
    if config.p is None:
        raise UsageError("the eigenform pipeline needs a prime p")
    tracker = StageTracker(metrics, config.p)
    retrying = Retrying(
        stop=stop_after_attempt(settings.max_escalations + 1),
        retry=retry_if_exception_type(PRECISION_ERRORS),
        before_sleep=_log_escalation,
        reraise=True,
    )
    for attempt in retrying:
        with attempt:
            buffer = (
                settings.precision_buffer
                + (attempt.retry_state.attempt_number - 1) * settings.buffer_step
            )
            result = compute_eigenform(config, settings, tracker, buffer)
    tracker.record_precision(result.m_verified)
    return result


def certify_stability(
    config: RunConfig,
    result: EigenformResult,
    settings: Settings | None = None,
    metrics: MetricsPort | None = None,
) -> EigenformResult:
    """Rerun with more Katz layers and more working precision than ``result`` used."""
    settings = settings or get_settings()
    tracker = StageTracker(metrics, config.p)
    pinned = config.model_copy(update={"n_levels": result.katz.n_levels, "T_q": "auto"})
    with tracker.stage("stability"):
        return compute_eigenform(
            pinned,
            settings,
            tracker,
            result.precisions["buffer"],
            extra_levels=settings.stability_extra_levels,
            extra_precision=settings.stability_extra_precision,
        )


def verify_config(
    config: RunConfig,
    settings: Settings | None = None,
    metrics: MetricsPort | None = None,
) -> VerificationReport:
    settings = settings or get_settings()
    result = run_pipeline(config, settings, metrics)
    rerun = certify_stability(config, result, settings, metrics) if settings.certify else None
    checks = run_checks(result, rerun, workers=settings.threads)
    return build_report(result, checks, _echo(config, result))


def verify_example(
    number: int,
    settings: Settings | None = None,
    metrics: MetricsPort | None = None,
    L_max: int = 100,
) -> VerificationReport:
    """Recompute a published table and run every check on it."""
    settings = settings or get_settings()
    if number not in PUBLISHED_EXAMPLES:
        raise UsageError(f"unknown paper example {number} (known: {sorted(PUBLISHED_EXAMPLES)})")
    example = PUBLISHED_EXAMPLES[number]

    def compute(ex: PublishedExample, convention: Convention) -> EigenformResult:
        return run_pipeline(example_config(ex, convention, L_max), settings, metrics)

    def rerun(result: EigenformResult) -> EigenformResult | None:
        if not settings.certify:
            return None
        config = example_config(example, result.convention, L_max)
        return certify_stability(config, result, settings, metrics)

    return reproduce_table(example, compute, rerun, workers=settings.threads)


def _echo(config: RunConfig, result: EigenformResult) -> dict[str, object]:
    return {
        **config.echo(),
        "n_levels": result.katz.n_levels,
        "T_q": result.katz.T_q,
        "m_work": result.katz.m,
        "levels_resolved_automatically": config.n_levels == "auto",
    }


def eigenform_report(
    config: RunConfig,
    settings: Settings | None = None,
    metrics: MetricsPort | None = None,
) -> VerificationReport:
    """The a_l' table with the stability certificate as its only check."""
    settings = settings or get_settings()
    result = run_pipeline(config, settings, metrics)
    rerun = certify_stability(config, result, settings, metrics) if settings.certify else None
    return build_report(result, [check_stability(result, rerun)], _echo(config, result))
