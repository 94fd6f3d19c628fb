"""Logging utility for the application."""

import logging
from pathlib import Path
from datetime import datetime
from typing import Optional


def setup_logger(name: str = "LissajousScars", log_dir: Optional[Path] = None) -> logging.Logger:
    """Set up and configure the application logger.

    Creates a logger with a console handler and, when ``log_dir`` is given,
    a file handler:
    - Console: INFO and above on stderr with a short format (solver progress
      records appear here as ``key=value`` lines)
    - File: DEBUG and above with function names and line numbers

    Args:
        name: Logger name
        log_dir: Directory for log files. None disables file logging

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)  # Capture all levels, handlers filter

    # Detailed formatter for the run log (function name and line number)
    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    # Short formatter for the console
    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )

    # Avoid duplicate console handlers if logger already configured
    if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
               for h in logger.handlers):
        # Console handler on stderr, INFO and above
        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(simple_formatter)
        logger.addHandler(console_handler)

    # File handler - keeps DEBUG records for troubleshooting a run
    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        # One file per day, shared by all runs writing into this directory
        log_file = log_dir / f"run_{datetime.now().strftime('%Y%m%d')}.log"
        already_attached = any(
            isinstance(h, logging.FileHandler) and Path(h.baseFilename) == log_file.resolve()
            for h in logger.handlers
        )
        if not already_attached:
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)  # Save everything, including per-sweep details
            file_handler.setFormatter(detailed_formatter)
            logger.addHandler(file_handler)

    return logger
