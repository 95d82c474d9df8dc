"""MetricsPort interface for computation metrics (domain layer).

The pipeline records how long each stage took and which precision it
certified; the adapter decides how those numbers are exposed.
"""
from dataclasses import dataclass
from typing import Protocol


class MetricsPort(Protocol):
    """Port (interface) for metrics collection.

    Structural subtyping: any class with these methods satisfies the port.
    """

    def inc_counter(self, name: str, labels: dict[str, str]) -> None:
        """Increment a counter metric by 1.

        Args:
            name: Metric name (e.g., "ovmf_stage_total")
            labels: Key-value pairs for metric dimensions
                   (e.g., {"stage": "katz_basis", "status": "ok"})
        """
        ...

    def observe_histogram(self, name: str, value: float, labels: dict[str, str]) -> None:
        """Record a value (e.g. a stage duration in seconds) in a histogram."""
        ...

    def set_gauge(self, name: str, value: float, labels: dict[str, str]) -> None:
        """Set a gauge metric to a specific value (e.g. the verified precision)."""
        ...

    def render(self) -> bytes:
        """Current metrics in the adapter's exposition format."""
        ...


@dataclass
class MetricsLabels:
    """Labels used across the pipeline metrics.

    All of them have low cardinality: a handful of stages, primes and
    statuses per run.
    """

    # Constant labels (set once per process)
    service: str = ""
    version: str = ""

    # Per-stage labels
    stage: str = ""
    prime: str = ""
    status: str = ""

    def to_dict(self) -> dict[str, str]:
        """Only the non-empty labels."""
        labels = {}
        if self.service:
            labels["service"] = self.service
        if self.version:
            labels["version"] = self.version
        if self.stage:
            labels["stage"] = self.stage
        if self.prime:
            labels["prime"] = self.prime
        if self.status:
            labels["status"] = self.status
        return labels

    def constant_labels(self) -> dict[str, str]:
        return {"service": self.service, "version": self.version}
