"""Logging configuration module.

Sets up logging for the command-line and HTTP entry points with
configurable log levels and an optional log file.
"""

from __future__ import annotations

import logging
import os
import sys
from typing import Optional

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s:%(funcName)s:%(lineno)d - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logger(
    name: str = "gjr_pricing",
    level: Optional[str] = None,
    log_file: Optional[str] = None,
) -> logging.Logger:
    """Configure and return a logger instance.

    Library modules log through ``logging.getLogger(__name__)``; entry points
    call this once with ``name="src"`` so those records reach the handlers.

    Args:
        name: Logger name.
        level: Log level string ("DEBUG", "INFO", "WARNING", "ERROR").
            Defaults to LOG_LEVEL env var or "INFO".
        log_file: Optional path to a log file. If provided, logs are
            written to both console and file.

    Returns:
        Configured logger instance.
    """
    log_level = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    if not isinstance(getattr(logging, log_level, None), int):
        log_level = "INFO"

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, log_level))

    # Avoid adding duplicate handlers on repeated calls
    if logger.handlers:
        return logger

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger
