"""
Logging Utilities for datadep
All diagnostics go to stderr so stdout stays machine-parseable
"""

import logging
import sys
from typing import Optional, Union

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

_ROOT = "datadep"


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger inside the ``datadep`` hierarchy

    Args:
        name: Module name, usually ``__name__``

    Returns:
        Logger instance
    """
    if not name or name == _ROOT:
        return logging.getLogger(_ROOT)
    if not name.startswith(_ROOT + "."):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)


def configure_logging(level: Union[int, str] = logging.WARNING) -> None:
    """
    Attach a single stderr handler to the package logger

    Safe to call repeatedly; the previous handler is replaced so the
    current ``sys.stderr`` is always the target.

    Args:
        level: Logging level name or number
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING

    logger = logging.getLogger(_ROOT)
    for handler in list(logger.handlers):
        if getattr(handler, "_datadep", False):
            logger.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._datadep = True
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
