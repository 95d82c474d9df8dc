"""Unit tests for the pipeline use cases.

The eigenform pass itself is exercised end to end in tests/integration; here
it is replaced by a mock to pin down configuration and escalation behaviour.
"""
import pytest
from pydantic import ValidationError
from pytest_mock import MockerFixture

from ovmf.application.pipeline import (
    RunConfig,
    compute_cm_form,
    example_config,
    run_pipeline,
    verify_example,
)
from ovmf.domain.cmforms import CMSpec
from ovmf.domain.eigen import Convention
from ovmf.domain.errors import (
    InsufficientPrecisionError,
    IrregularConfigurationError,
    NormalizationError,
    UsageError,
)
from ovmf.domain.ports.metrics import MetricsPort
from ovmf.domain.verify import PUBLISHED_EXAMPLES
from ovmf.infrastructure.config import Settings


class TestRunConfig:
    def test_defaults(self) -> None:
        config = RunConfig(D=-4, k=5, p=5)

        assert config.m_target == 1
        assert config.n_levels == "auto"
        assert config.T_q == "auto"
        assert config.convention is Convention.TABLE
        assert config.spec() == CMSpec(-4, 5, 5, 1)

    @pytest.mark.parametrize(
        "fields",
        [
            {"D": -4, "k": 4},
            {"D": -5, "k": 5},
            {"D": -4, "k": 5, "p": 5, "m_target": 0},
            {"D": -4, "k": 5, "p": 5, "n_levels": 0},
            {"D": -4, "k": 5, "p": 5, "T_q": "deep"},
            {"D": -4, "k": 5, "surprise": 1},
        ],
    )
    def test_rejects_invalid_fields(self, fields: dict[str, object]) -> None:
        with pytest.raises(ValidationError):
            RunConfig(**fields)  # type: ignore[arg-type]

    def test_inert_prime_is_not_a_usage_error(self) -> None:
        """The split-prime hypothesis failing is reported as its own error."""
        with pytest.raises(IrregularConfigurationError):
            RunConfig(D=-4, k=5, p=7)

    def test_echo_is_json_ready(self) -> None:
        echo = RunConfig(D=-3, k=7, p=7, m_target=3, convention=Convention.PAPER).echo()

        assert echo["convention"] == "paper"
        assert echo["n_levels"] == "auto"

    def test_example_config(self) -> None:
        config = example_config(PUBLISHED_EXAMPLES[2], Convention.TABLE_UNSUBTRACTED, L_max=50)

        assert config.spec() == CMSpec(-3, 7, 7, 22)
        assert config.convention is Convention.TABLE_UNSUBTRACTED
        assert config.L_max == 50


class TestComputeCMForm:
    def test_without_prime(self) -> None:
        result = compute_cm_form(RunConfig(D=-4, k=5, terms=10))

        assert result.stab is None
        assert result.assumptions() is None
        assert result.g0.T == 10

    def test_with_prime_stabilizes(self, mocker: MockerFixture) -> None:
        """Given p = 5 and a metrics port
        When computing the CM form
        Then it is stabilized and both stages are recorded.
        """
        # Given
        metrics = mocker.MagicMock(spec=MetricsPort)

        # When
        result = compute_cm_form(RunConfig(D=-4, k=5, p=5, terms=10), metrics)

        # Then
        assert result.stab is not None
        assert result.stab.a_p == -14
        assert result.assumptions()["verified"] is True  # type: ignore[index]
        stages = {c.args[1]["stage"] for c in metrics.inc_counter.call_args_list}
        assert stages == {"cm_form", "stabilize"}

    def test_terms_must_reach_p(self) -> None:
        with pytest.raises(UsageError, match="--terms"):
            compute_cm_form(RunConfig(D=-3, k=7, p=7, terms=5))


class TestRunPipelineEscalation:
    def test_needs_prime(self, test_settings: Settings) -> None:
        with pytest.raises(UsageError):
            run_pipeline(RunConfig(D=-4, k=5), test_settings)

    def test_escalates_buffer_after_precision_shortfall(
        self, mocker: MockerFixture, test_settings: Settings
    ) -> None:
        """Given a first pass that certifies too little precision
        When running the pipeline
        Then the second pass uses a buffer raised by buffer_step.
        """
        # Given
        result = mocker.MagicMock(m_verified=4)
        compute = mocker.patch(
            "ovmf.application.pipeline.compute_eigenform",
            side_effect=[InsufficientPrecisionError(2, 4), result],
        )

        # When
        returned = run_pipeline(RunConfig(D=-4, k=5, p=5, m_target=4), test_settings)

        # Then
        assert returned is result
        buffers = [c.args[3] for c in compute.call_args_list]
        assert buffers == [6, 12]

    def test_gives_up_after_max_escalations(
        self, mocker: MockerFixture, test_settings: Settings
    ) -> None:
        compute = mocker.patch(
            "ovmf.application.pipeline.compute_eigenform",
            side_effect=InsufficientPrecisionError(1, 4),
        )

        with pytest.raises(InsufficientPrecisionError):
            run_pipeline(RunConfig(D=-4, k=5, p=5, m_target=4), test_settings)
        assert compute.call_count == test_settings.max_escalations + 1

    def test_other_errors_are_not_retried(
        self, mocker: MockerFixture, test_settings: Settings
    ) -> None:
        compute = mocker.patch(
            "ovmf.application.pipeline.compute_eigenform",
            side_effect=NormalizationError(2, 1),
        )

        with pytest.raises(NormalizationError):
            run_pipeline(RunConfig(D=-4, k=5, p=5), test_settings)
        assert compute.call_count == 1

    def test_records_verified_precision(
        self, mocker: MockerFixture, test_settings: Settings
    ) -> None:
        metrics = mocker.MagicMock(spec=MetricsPort)
        mocker.patch(
            "ovmf.application.pipeline.compute_eigenform",
            return_value=mocker.MagicMock(m_verified=7),
        )

        run_pipeline(RunConfig(D=-4, k=5, p=5), test_settings, metrics)

        metrics.set_gauge.assert_called_once_with(
            "ovmf_precision_verified", 7.0, {"prime": "5"}
        )


class TestVerifyExample:
    def test_unknown_example(self, test_settings: Settings) -> None:
        with pytest.raises(UsageError, match="unknown paper example"):
            verify_example(3, test_settings)
