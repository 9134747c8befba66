"""
Centralized logging configuration.

Responsibilities:
- Configure stderr and optional rotating file logging
- Respect LOG_LEVEL and LOG_FILE_PATH from settings (CLI may override the level)
- Prevent duplicate log handlers
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from app.config import settings

_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


def setup_logging(level: Optional[str] = None) -> None:
    """
    Configure application-wide logging.

    Should be called ONCE by the CLI entry point.
    """
    log_level = (level or settings.LOG_LEVEL).upper()

    if log_level not in _LEVELS:
        raise ValueError(f"Invalid LOG_LEVEL: {level or settings.LOG_LEVEL}")

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Prevent duplicate handlers
    if root_logger.handlers:
        return

    formatter = logging.Formatter(
        fmt="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # Console handler (stderr, stdout carries command output) ----------------
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # File handler (rotating) ------------------------------------------------
    if settings.LOG_FILE_PATH:
        log_file_path = Path(settings.LOG_FILE_PATH)
        log_file_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            filename=log_file_path,
            maxBytes=5 * 1024 * 1024,  # 5 MB
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    root_logger.debug("Logging initialized at %s", log_level)
