"""PrometheusMetricsAdapter implements MetricsPort using the Prometheus client library.

A CLI run has no scrape endpoint, so the registry is rendered once at the end
and optionally written to a textfile-collector file.
"""
import threading
from pathlib import Path

from prometheus_client import (
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    PlatformCollector,
    ProcessCollector,
    generate_latest,
    write_to_textfile,
)

# 10 ms up to 10 min: stages range from CM expansions to deep Katz systems.
DURATION_BUCKETS = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0, 600.0)


class PrometheusMetricsAdapter:
    """Prometheus implementation of MetricsPort.

    Features:
    - Thread-safe lazy initialization of metrics
    - Custom registry (no global state)
    - Python runtime metrics (process, platform)
    - Constant labels carried as ordinary label names on every metric
    """

    def __init__(self, constant_labels: dict[str, str]) -> None:
        self.registry = CollectorRegistry()
        self.registry.register(ProcessCollector(registry=None))
        self.registry.register(PlatformCollector(registry=None))

        self._counters: dict[str, Counter] = {}
        self._histograms: dict[str, Histogram] = {}
        self._gauges: dict[str, Gauge] = {}
        self._lock = threading.Lock()
        self._constant_labels = {k: v for k, v in constant_labels.items() if v}

    def inc_counter(self, name: str, labels: dict[str, str]) -> None:
        counter = self._get_or_create_counter(name, labels)
        counter.labels(**self._label_values(labels)).inc()

    def observe_histogram(self, name: str, value: float, labels: dict[str, str]) -> None:
        histogram = self._get_or_create_histogram(name, labels)
        histogram.labels(**self._label_values(labels)).observe(value)

    def set_gauge(self, name: str, value: float, labels: dict[str, str]) -> None:
        gauge = self._get_or_create_gauge(name, labels)
        gauge.labels(**self._label_values(labels)).set(value)

    def render(self) -> bytes:
        """Prometheus text exposition of the registry."""
        return generate_latest(self.registry)

    def write_textfile(self, path: Path) -> None:
        write_to_textfile(str(path), self.registry)

    def _get_or_create_counter(self, name: str, labels: dict[str, str]) -> Counter:
        if name in self._counters:
            return self._counters[name]
        with self._lock:
            if name not in self._counters:
                self._counters[name] = Counter(
                    name=name,
                    documentation=f"{name} metric",
                    labelnames=self._extract_label_names(labels),
                    registry=self.registry,
                )
            return self._counters[name]

    def _get_or_create_histogram(self, name: str, labels: dict[str, str]) -> Histogram:
        if name in self._histograms:
            return self._histograms[name]
        with self._lock:
            if name not in self._histograms:
                self._histograms[name] = Histogram(
                    name=name,
                    documentation=f"{name} metric",
                    labelnames=self._extract_label_names(labels),
                    buckets=DURATION_BUCKETS,
                    registry=self.registry,
                )
            return self._histograms[name]

    def _get_or_create_gauge(self, name: str, labels: dict[str, str]) -> Gauge:
        if name in self._gauges:
            return self._gauges[name]
        with self._lock:
            if name not in self._gauges:
                self._gauges[name] = Gauge(
                    name=name,
                    documentation=f"{name} metric",
                    labelnames=self._extract_label_names(labels),
                    registry=self.registry,
                )
            return self._gauges[name]

    def _label_values(self, labels: dict[str, str]) -> dict[str, str]:
        return {**labels, **self._constant_labels}

    def _extract_label_names(self, labels: dict[str, str]) -> list[str]:
        """Sorted union of the call labels and the constant labels."""
        return sorted(set(labels) | set(self._constant_labels))
