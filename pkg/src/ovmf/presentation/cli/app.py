"""Command-line application: cm-form, eigenform and verify."""
import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import BinaryIO, Literal

from pydantic import ValidationError

from ovmf import __version__
from ovmf.application.pipeline import (
    RunConfig,
    compute_cm_form,
    eigenform_report,
    verify_config,
    verify_example,
)
from ovmf.domain.eigen import Convention
from ovmf.domain.errors import IrregularConfigurationError, OvmfError, UsageError
from ovmf.domain.ports.metrics import MetricsLabels, MetricsPort
from ovmf.infrastructure.config import Settings, get_settings
from ovmf.infrastructure.logging import get_logger, setup_logging
from ovmf.infrastructure.observability.prometheus_adapter import (
    PrometheusMetricsAdapter,
)
from ovmf.presentation.shared.converters import render_cm_form, render_report

logger = get_logger(component="cli")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_COMPUTATION = 3

Command = Callable[[argparse.Namespace, Settings, MetricsPort], tuple[bytes, int]]


def _auto_or_int(value: str) -> int | Literal["auto"]:
    if value == "auto":
        return "auto"
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {value!r}") from None


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    form = parent.add_argument_group("form")
    form.add_argument("--disc", type=int, help="fundamental discriminant D < 0")
    form.add_argument("--weight", type=int, help="weight k >= 2")
    form.add_argument("--p", type=int, help="split prime p >= 5")
    form.add_argument("--prec", type=int, default=1, help="target precision m (p^m)")
    form.add_argument("--terms", type=int, default=10, help="q-expansion length for cm-form")

    katz = parent.add_argument_group("katz")
    katz.add_argument("--levels", type=_auto_or_int, default="auto", help="Katz depth or 'auto'")
    katz.add_argument("--truncation", type=_auto_or_int, default="auto", help="T_q or 'auto'")
    katz.add_argument("--lmax", type=int, default=100, help="largest prime l in the table")
    katz.add_argument(
        "--convention",
        choices=[str(c) for c in Convention],
        default=str(Convention.TABLE),
        help="normalization of f'",
    )
    katz.add_argument("--no-certify", action="store_true", help="skip the stability rerun")

    output = parent.add_argument_group("output")
    output.add_argument("--format", choices=["json", "csv", "text"], default="json")
    output.add_argument("--log-level", help="override OVMF_LOG_LEVEL")
    output.add_argument("--metrics-file", type=Path, help="write Prometheus metrics here")
    return parent


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovmf",
        description="Generalized eigenforms at critical CM points, modulo p^m.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    parent = _common_options()

    cm = commands.add_parser("cm-form", parents=[parent], help="q-expansion of the CM form")
    cm.set_defaults(handler=cmd_cm_form)

    eigen = commands.add_parser(
        "eigenform", parents=[parent], help="table of a_l' for the generalized eigenform"
    )
    eigen.set_defaults(handler=cmd_generalized_eigenform)

    verify = commands.add_parser("verify", parents=[parent], help="run every check")
    verify.add_argument("--paper-example", type=int, choices=[1, 2])
    verify.set_defaults(handler=cmd_verify)
    return parser


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    if missing:
        raise UsageError(f"{args.command} needs {', '.join(missing)}")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        D=args.disc,
        k=args.weight,
        p=args.p,
        m_target=args.prec,
        n_levels=args.levels,
        T_q=args.truncation,
        terms=args.terms,
        convention=Convention(args.convention),
        L_max=args.lmax,
        format=args.format,
    )


def settings_from_args(args: argparse.Namespace, settings: Settings) -> Settings:
    """Command-line flags take precedence over OVMF_* variables."""
    overrides: dict[str, object] = {}
    if args.log_level:
        overrides["log_level"] = args.log_level.upper()
    if args.metrics_file:
        overrides["metrics_file"] = args.metrics_file
    if args.no_certify:
        overrides["certify"] = False
    if not overrides:
        return settings
    return Settings.model_validate({**settings.model_dump(), **overrides})


def cmd_cm_form(
    args: argparse.Namespace, settings: Settings, metrics: MetricsPort
) -> tuple[bytes, int]:
    _require(args, "disc", "weight")
    config = config_from_args(args)
    return render_cm_form(compute_cm_form(config, metrics), config), EXIT_OK


def cmd_generalized_eigenform(
    args: argparse.Namespace, settings: Settings, metrics: MetricsPort
) -> tuple[bytes, int]:
    _require(args, "disc", "weight", "p")
    config = config_from_args(args)
    report = eigenform_report(config, settings, metrics)
    status = EXIT_OK if report.passed else EXIT_CHECK_FAILED
    return render_report(report, config.format), status


def cmd_verify(
    args: argparse.Namespace, settings: Settings, metrics: MetricsPort
) -> tuple[bytes, int]:
    if args.paper_example is not None:
        report = verify_example(args.paper_example, settings, metrics, L_max=args.lmax)
    else:
        _require(args, "disc", "weight", "p")
        report = verify_config(config_from_args(args), settings, metrics)
    status = EXIT_OK if report.passed else EXIT_CHECK_FAILED
    if not report.passed:
        logger.warning(
            "asserted checks failed", checks=[c.name for c in report.checks if c.failed]
        )
    return render_report(report, args.format), status


def run(argv: Sequence[str] | None = None, stdout: BinaryIO | None = None) -> int:
    """Parse ``argv``, run one command and return its exit code."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = settings_from_args(args, get_settings())
    except ValidationError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"invalid option: {exc.errors()[0]['msg']}\n")
        return EXIT_USAGE
    setup_logging(settings)
    metrics = PrometheusMetricsAdapter(
        MetricsLabels(service="ovmf", version=settings.version).constant_labels()
    )

    handler: Command = args.handler
    try:
        payload, status = handler(args, settings, metrics)
    except (ValidationError, UsageError, IrregularConfigurationError) as exc:
        logger.error("invalid configuration", command=args.command, error=str(exc))
        return EXIT_USAGE
    except OvmfError as exc:
        logger.error(
            "computation failed",
            command=args.command,
            error_type=type(exc).__name__,
            error=str(exc),
            **exc.details(),
        )
        return EXIT_COMPUTATION
    finally:
        if settings.metrics_file is not None:
            metrics.write_textfile(settings.metrics_file)

    out = stdout if stdout is not None else sys.stdout.buffer
    out.write(payload)
    out.flush()
    return status
