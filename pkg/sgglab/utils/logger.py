"""
Logging for sgglab.

All modules log through children of the "sgglab" logger. The console
handler writes to stderr because gen, stats and report print results on
stdout; an optional rotating file keeps DEBUG detail.
"""

import logging
import sys
import time
from contextlib import contextmanager
from functools import wraps
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Callable, Iterator, Optional, TypeVar, Union

F = TypeVar("F", bound=Callable)

ROOT_LOGGER = "sgglab"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
CONSOLE_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"
FILE_FORMAT = "%(asctime)s | %(name)s | %(levelname)s | %(filename)s:%(lineno)d | %(message)s"
DEFAULT_MAX_MB = 10
DEFAULT_BACKUPS = 5


def _level(value: Union[str, int, None]) -> int:
    if isinstance(value, int):
        return value
    level = logging.getLevelName(str(value or "INFO").upper())
    return level if isinstance(level, int) else logging.INFO


def setup_logger(
    name: str = ROOT_LOGGER,
    log_file: Optional[str] = None,
    log_level: Union[str, int] = "INFO",
    max_mb: float = DEFAULT_MAX_MB,
    backups: int = DEFAULT_BACKUPS,
) -> logging.Logger:
    """
    Configure the laboratory logger.

    Calling it again replaces the handlers, so repeated CLI invocations in
    one process do not duplicate output.

    Args:
        name: Logger name
        log_file: Rotating log file, created with its parent directory
        log_level: Console level; unknown names fall back to INFO
        max_mb: Size at which the log file rotates
        backups: Rotated files kept

    Returns:
        The configured logger
    """
    level = _level(log_level)
    logger = logging.getLogger(name)
    logger.handlers.clear()
    logger.propagate = False

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    logger.addHandler(console)

    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        rotating = RotatingFileHandler(
            path, maxBytes=int(max_mb * 1024 * 1024), backupCount=backups, encoding="utf-8"
        )
        rotating.setLevel(logging.DEBUG)
        rotating.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        logger.addHandler(rotating)

    logger.setLevel(min(level, logging.DEBUG) if log_file else level)
    return logger


@contextmanager
def timed(logger: logging.Logger, label: str) -> Iterator[None]:
    """Log how long the enclosed block took, or how long it ran before failing."""
    start = time.perf_counter()
    logger.debug(f"Starting {label}...")
    try:
        yield
    except Exception as e:
        logger.error(f"Failed {label} after {time.perf_counter() - start:.2f} seconds: {e}")
        raise
    logger.info(f"Completed {label} in {time.perf_counter() - start:.2f} seconds")


def log_execution_time(logger: logging.Logger) -> Callable[[F], F]:
    """
    Decorator form of timed, labelled with the function name.

    Usage:
        @log_execution_time(logger)
        def make_dataset(...):
            ...
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            with timed(logger, func.__name__):
                return func(*args, **kwargs)

        return wrapper
    return decorator
