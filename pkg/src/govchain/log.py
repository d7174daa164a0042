"""structlog configuration shared by the library and the CLI."""

from __future__ import annotations

import logging
import sys

import structlog

from govchain.config import GovchainSettings


def configure_logging(settings: GovchainSettings | None = None) -> None:
    """Configure structlog from settings.

    Console rendering is the default; ``log_format="json"`` switches to
    one JSON object per line. Diagnostic output goes to stderr so that
    CLI stdout stays machine-readable.
    """
    settings = settings or GovchainSettings()
    level = logging.getLevelNamesMapping().get(
        settings.log_level.upper(), logging.INFO
    )
    renderer: structlog.typing.Processor
    if settings.log_format == "json":
        renderer = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
