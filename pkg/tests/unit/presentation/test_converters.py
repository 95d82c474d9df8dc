"""Unit tests for the stdout renderers."""
import orjson
import pytest

from ovmf.application.pipeline import RunConfig, compute_cm_form
from ovmf.domain.verify import Check, CheckStatus, VerificationReport
from ovmf.presentation.shared.converters import (
    cm_form_to_json,
    dumps,
    render_cm_form,
    render_report,
    report_to_csv,
)


@pytest.fixture
def report() -> VerificationReport:
    return VerificationReport(
        config={"D": -4, "k": 5, "p": 5, "m_target": 2},
        m_verified=3,
        e_f=2,
        table=((3, 1), (7, 0), (11, 20)),
        checks=(Check("a_p_vanishing", CheckStatus.PASS, True, {"valuation": 3}),),
        p=5,
        m_out=2,
    )


class TestJson:
    def test_dumps_is_deterministic(self) -> None:
        assert dumps({"b": 1, "a": [1, 2]}) == b'{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'

    def test_cm_form_payload(self) -> None:
        """Given the weight-5 CM form with p = 5
        When converting to JSON
        Then g0 and the stabilization data are present as exact strings.
        """
        # Given
        config = RunConfig(D=-4, k=5, p=5, terms=6)
        result = compute_cm_form(config)

        # When
        payload = cm_form_to_json(result, config)

        # Then
        assert payload["g0"]["coeffs"] == ["0", "1", "-4", "0", "16", "-14", "0"]
        assert payload["stabilized"]["a_p"] == "-14"
        assert payload["stabilized"]["hecke_polynomial"] == ["625", "14", "1"]
        assert payload["config"]["D"] == -4

    def test_report_json_round_trips_through_orjson(self, report: VerificationReport) -> None:
        payload = orjson.loads(render_report(report, "json"))

        assert payload["passed"] is True
        assert payload["table"][2] == {"l": 11, "value": "20"}


class TestCsvAndText:
    def test_report_csv_keeps_zero_rows(self, report: VerificationReport) -> None:
        assert report_to_csv(report) == b"l,value\n3,1\n7,0\n11,20\n"
        assert render_report(report, "csv") == report_to_csv(report)

    def test_report_text(self, report: VerificationReport) -> None:
        text = render_report(report, "text").decode()

        assert text.startswith("D=-4 k=5 p=5 m_verified=3 e_f=2\n")
        assert " 7 | 0" not in text
        assert "[pass] a_p_vanishing" in text

    @pytest.mark.parametrize(
        ("fmt", "expected"),
        [
            ("csv", b"n,value\n0,0\n1,1\n2,-4\n3,0\n"),
            ("text", b"0 | 0\n1 | 1\n2 | -4\n3 | 0\n"),
        ],
    )
    def test_cm_form_tables(self, fmt: str, expected: bytes) -> None:
        config = RunConfig(D=-4, k=5, terms=3, format=fmt)  # type: ignore[arg-type]

        assert render_cm_form(compute_cm_form(config), config) == expected
