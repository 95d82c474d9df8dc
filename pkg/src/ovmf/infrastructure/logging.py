"""Logging configuration for ovmf.

Logs go to stderr so that stdout carries only the rendered results.
"""
import logging
import sys
from typing import Any

import structlog

from ovmf.infrastructure.config import Settings, get_settings


def setup_logging(settings: Settings | None = None) -> None:
    """Configure structured logging for the application."""
    settings = settings or get_settings()

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer() if settings.log_format == "json"
            else structlog.dev.ConsoleRenderer(colors=False),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, settings.log_level),
        force=True,
    )

    # sympy's polys code logs at DEBUG
    logging.getLogger("sympy").setLevel(logging.WARNING)


def get_logger(**kwargs: Any) -> structlog.stdlib.BoundLogger:
    """Logger carrying ``kwargs``; configuration is resolved on first use."""
    return structlog.get_logger(**kwargs)
