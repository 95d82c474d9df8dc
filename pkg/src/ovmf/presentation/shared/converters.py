"""Renderers from domain results to the bytes written on stdout."""
import csv
import io
from typing import Any, Literal

import orjson

from ovmf.application.pipeline import CMFormResult, RunConfig
from ovmf.domain.verify import VerificationReport, render_text

OutputFormat = Literal["json", "csv", "text"]

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE


def dumps(payload: dict[str, Any]) -> bytes:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return orjson.dumps(payload, option=JSON_OPTIONS)


def _csv(header: tuple[str, str], rows: list[tuple[int, str]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue().encode()


def cm_form_to_json(result: CMFormResult, config: RunConfig) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "config": config.echo(),
        "g0": result.g0.to_json(),
    }
    if result.stab is not None:
        stab = result.stab
        payload["stabilized"] = {
            "f": stab.f.to_json(),
            "a_p": str(stab.a_p),
            "alpha": str(stab.alpha),
            "beta": str(stab.beta),
            "hecke_polynomial": [str(c) for c in stab.hecke_polynomial()],
            "assumptions": result.assumptions(),
        }
    return payload


def render_cm_form(result: CMFormResult, config: RunConfig) -> bytes:
    coefficients = [(n, str(a)) for n, a in enumerate(result.g0.coeffs)]
    match config.format:
        case "json":
            return dumps(cm_form_to_json(result, config))
        case "csv":
            return _csv(("n", "value"), coefficients)
        case _:
            width = len(str(result.g0.T))
            lines = [f"{n:>{width}} | {a}" for n, a in coefficients]
            return ("\n".join(lines) + "\n").encode()


def report_to_csv(report: VerificationReport) -> bytes:
    return _csv(("l", "value"), [(ell, str(value)) for ell, value in report.table])


def render_report(report: VerificationReport, fmt: OutputFormat) -> bytes:
    match fmt:
        case "json":
            return dumps(report.to_json())
        case "csv":
            return report_to_csv(report)
        case _:
            return render_text(report).encode()
