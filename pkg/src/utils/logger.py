"""
Logging configuration for ETLServo with rotating logs,
customizable log levels, and a shared application logger.
"""
import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Union, Literal
import sys

# Type definitions for log levels
LogLevel = Union[
    int,
    Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
]

class LogConfig:
    """Configuration constants for logging"""
    APP_LOGGER: str = "ETLServo"
    DEFAULT_LOG_LEVEL: int = logging.INFO
    MAX_BYTES: int = 5 * 1024 * 1024  # 5 MB
    BACKUP_COUNT: int = 5
    DEFAULT_LOG_FILE: str = "logs/etl.log"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - [%(module)s:%(lineno)d] - %(message)s"

def get_log_level(level: LogLevel) -> int:
    """
    Convert string log level to logging constant if necessary

    Args:
        level: Log level as string or integer

    Returns:
        int: Logging level constant

    Raises:
        ValueError: If invalid log level provided
    """
    if isinstance(level, int):
        return level
    numeric = logging.getLevelName(level.strip().upper())
    if not isinstance(numeric, int):
        raise ValueError(f"Invalid log level: {level}")
    return numeric

def setup_logger(log_file: str = LogConfig.DEFAULT_LOG_FILE,
                 level: LogLevel = LogConfig.DEFAULT_LOG_LEVEL) -> logging.Logger:
    """Set up and configure the application logger.

    Args:
        log_file (str): Path to the log file
        level: Log level for both handlers

    Returns:
        logging.Logger: Configured logger instance
    """
    log_level = get_log_level(level)
    logger = logging.getLogger(LogConfig.APP_LOGGER)

    # Prevent adding handlers if they already exist
    if logger.hasHandlers():
        logger.handlers.clear()

    logger.setLevel(log_level)
    formatter = logging.Formatter(LogConfig.LOG_FORMAT)

    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=LogConfig.MAX_BYTES,
        backupCount=LogConfig.BACKUP_COUNT,
        encoding="utf-8"
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(formatter)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    # Prevent propagation to prevent duplicate logs
    logger.propagate = False

    return logger

def get_logger(name: str = "") -> logging.Logger:
    """
    Get the application logger or one of its children.
    Handlers are attached only by ``setup_logger``.

    Args:
        name: Child logger suffix, usually the module name

    Returns:
        logging.Logger: Logger instance
    """
    base = logging.getLogger(LogConfig.APP_LOGGER)
    return base.getChild(name) if name else base
