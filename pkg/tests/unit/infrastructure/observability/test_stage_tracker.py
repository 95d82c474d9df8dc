"""Unit tests for StageTracker."""
import pytest
from pytest_mock import MockerFixture

from ovmf.domain.ports.metrics import MetricsPort
from ovmf.infrastructure.observability.stage_tracker import (
    PRECISION_VERIFIED,
    STAGE_DURATION,
    STAGE_TOTAL,
    StageTracker,
)


class TestStageTracker:
    def test_successful_stage_records_metrics(self, mocker: MockerFixture) -> None:
        """Given a tracker with a metrics port
        When a stage finishes normally
        Then its duration is observed and an ok counter is incremented.
        """
        # Given
        metrics = mocker.MagicMock(spec=MetricsPort)
        tracker = StageTracker(metrics, prime=5)

        # When
        with tracker.stage("katz_basis"):
            pass

        # Then
        name, duration, labels = metrics.observe_histogram.call_args.args
        assert name == STAGE_DURATION
        assert duration >= 0
        assert labels == {"stage": "katz_basis", "prime": "5"}
        metrics.inc_counter.assert_called_once_with(
            STAGE_TOTAL, {"stage": "katz_basis", "status": "ok"}
        )
        assert "katz_basis" in tracker.durations

    def test_failing_stage_is_counted_and_reraised(self, mocker: MockerFixture) -> None:
        metrics = mocker.MagicMock(spec=MetricsPort)
        tracker = StageTracker(metrics, prime=7)

        with pytest.raises(ArithmeticError), tracker.stage("eigenspace"):
            raise ArithmeticError("not a unit")

        metrics.inc_counter.assert_called_once_with(
            STAGE_TOTAL, {"stage": "eigenspace", "status": "error"}
        )

    def test_repeated_stage_accumulates(self) -> None:
        tracker = StageTracker(None)

        tracker.track_completion("cm_form", "ok", 0.5)
        tracker.track_completion("cm_form", "ok", 0.25)

        assert tracker.durations == {"cm_form": 0.75}
        assert tracker.prime == "none"

    def test_record_precision(self, mocker: MockerFixture) -> None:
        metrics = mocker.MagicMock(spec=MetricsPort)

        StageTracker(metrics, prime=5).record_precision(24)

        metrics.set_gauge.assert_called_once_with(PRECISION_VERIFIED, 24.0, {"prime": "5"})

    def test_without_metrics_port(self) -> None:
        tracker = StageTracker(None, prime=5)

        with tracker.stage("normalize"):
            pass
        tracker.record_precision(3)

        assert list(tracker.durations) == ["normalize"]
