"""Logging setup - call configure_logging() once from an entry point.

Library modules only ever do ``logging.getLogger(__name__)``; this module
decides where those records go. Records are routed through logfire so that
the spans opened around training runs and the log lines share one sink.
"""

import logging

import logfire

from maskd.settings import get_settings

_configured = False


def configure_logging(level: str | None = None) -> None:
    """Configure logfire and attach it to the ``maskd`` logger.

    Args:
        level: Log level name; defaults to MASKD_LOG_LEVEL (INFO)
    """
    global _configured
    settings = get_settings()
    level = (level or settings.log_level).upper()

    if not _configured:
        logfire.configure(
            send_to_logfire="if-token-present",
            token=settings.logfire_token or None,
            service_name="maskd",
            console=logfire.ConsoleOptions(min_log_level=level.lower()),
        )
        _configured = True

    logger = logging.getLogger("maskd")
    logger.setLevel(level)
    if not any(isinstance(h, logfire.LogfireLoggingHandler) for h in logger.handlers):
        logger.addHandler(logfire.LogfireLoggingHandler())
    logger.propagate = False
