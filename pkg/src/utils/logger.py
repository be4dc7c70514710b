"""Logger setup for ChoiMap"""

import logging
import os
import sys
from .. import config

_configured = False


def setup_logging(level=None):
    """Setup logging configuration.

    Safe to call more than once; handlers are only attached on the first call.
    """
    global _configured

    level = level or ("DEBUG" if config.DEBUG else config.LOG_LEVEL)

    # Create logger
    logger = logging.getLogger()
    logger.setLevel(level)

    if _configured:
        return

    # Console handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)

    # Format
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # File handler
    try:
        log_dir = os.path.dirname(config.LOG_FILE)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(config.LOG_FILE)
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    except Exception as e:
        logger.warning(f"Could not create file handler: {e}")

    _configured = True
    logger.info("Logging configured")
