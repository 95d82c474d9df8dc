"""Timing of pipeline stages with metrics and a structured log line per stage."""
import time
from collections.abc import Iterator
from contextlib import contextmanager

from ovmf.domain.ports.metrics import MetricsLabels, MetricsPort
from ovmf.infrastructure.logging import get_logger

logger = get_logger(component="stage_tracker")

STAGE_DURATION = "ovmf_stage_duration_seconds"
STAGE_TOTAL = "ovmf_stage_total"
PRECISION_VERIFIED = "ovmf_precision_verified"


class StageTracker:
    """Stage tracking shared by every command."""

    def __init__(self, metrics: MetricsPort | None, prime: int | None = None) -> None:
        self.metrics = metrics
        self.prime = "none" if prime is None else str(prime)
        self.durations: dict[str, float] = {}

    def track_completion(self, stage: str, status: str, duration: float) -> None:
        """Record metrics and log one finished stage."""
        self.durations[stage] = self.durations.get(stage, 0.0) + duration
        if self.metrics is not None:
            labels = MetricsLabels(stage=stage, prime=self.prime).to_dict()
            self.metrics.observe_histogram(STAGE_DURATION, duration, labels)
            self.metrics.inc_counter(
                STAGE_TOTAL, MetricsLabels(stage=stage, status=status).to_dict()
            )
        logger.info(
            "stage_completed",
            stage=stage,
            status=status,
            prime=self.prime,
            duration_ms=round(duration * 1000, 2),
        )

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        except Exception:
            self.track_completion(name, "error", time.perf_counter() - start)
            raise
        self.track_completion(name, "ok", time.perf_counter() - start)

    def record_precision(self, m_verified: int) -> None:
        if self.metrics is not None:
            self.metrics.set_gauge(
                PRECISION_VERIFIED, float(m_verified), MetricsLabels(prime=self.prime).to_dict()
            )
