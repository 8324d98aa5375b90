"""
Structured logging setup.

stdlib logging carries the records (stderr handler, level from settings);
structlog renders them as key/value events. Library modules only call
``get_logger``; handlers are installed by the CLI through ``configure_logging``.
"""

import logging
import sys
from typing import Optional

import structlog

_structlog_ready = False


def _configure_structlog(json: bool) -> None:
    global _structlog_ready

    renderer = structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _structlog_ready = True


def configure_logging(level: str = "WARNING", json: bool = False) -> None:
    """Install the stderr handler and the structlog pipeline."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    _configure_structlog(json)


def get_logger(name: Optional[str] = None) -> structlog.stdlib.BoundLogger:
    """Return a structlog logger bound to ``name``."""
    if not _structlog_ready:
        _configure_structlog(json=False)
    return structlog.get_logger(name)
