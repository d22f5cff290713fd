"""
File-based logging for the PQ diffusion toolkit
Creates timestamped log files and manages log formatting
"""
import os
import logging
from datetime import datetime

import config

LOGGER_NAME = 'PQDiffusion'

# Use log directory from config if available, otherwise use default
try:
    LOG_DIRECTORY = config.LOG_DIRECTORY
except AttributeError:
    LOG_DIRECTORY = os.path.join(os.path.dirname(__file__), "logs")


def setup_logger(log_file_name=None, verbose=None):
    """
    Set up a file-based logger with timestamped filename

    Args:
        log_file_name: Optional custom filename. If not provided, uses timestamp.
        verbose: Log at DEBUG level. Defaults to config.VERBOSE.

    Returns:
        (logger, log_file_path)
    """
    if verbose is None:
        verbose = config.VERBOSE
    level = logging.DEBUG if verbose else logging.INFO

    os.makedirs(LOG_DIRECTORY, exist_ok=True)
    if log_file_name is None:
        timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
        log_file_name = f"pqdiffusion_{timestamp}.log"
    log_file_path = os.path.join(LOG_DIRECTORY, log_file_name)

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)

    # Remove existing handlers to avoid duplicates
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers = []

    formatter = logging.Formatter('%(message)s')

    file_handler = logging.FileHandler(log_file_path, encoding='utf-8')
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)

    # Also add console handler for real-time monitoring
    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    return logger, log_file_path


def get_logger():
    """
    Get the package logger. Library modules only log through this and never
    attach handlers; without setup_logger() records go to the root logger.
    """
    return logging.getLogger(LOGGER_NAME)


def banner(logger, title, width=80):
    """Log a title framed by '=' rules"""
    logger.info("=" * width)
    logger.info(title)
    logger.info("=" * width)
