"""
Middleware for CLI handlers.

Provides:
- Logging of handler calls with timing
- Error handling that maps failures to exit codes
"""
import argparse
import logging
import sys
import time
from functools import wraps
from typing import Callable

from pydantic import ValidationError

from cli.config import settings
from core.errors import DataError, DomainError, ResourceLimitError, UsageError


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

Handler = Callable[[argparse.Namespace], int]


def exit_code_for(error: BaseException) -> int:
    """Exit status for a handler failure: usage problems 1, everything else 2."""
    if isinstance(error, (UsageError, ValidationError)):
        return EXIT_USAGE
    return EXIT_DATA


def with_error_handler(handler: Handler) -> Handler:
    """
    Decorator for handler error handling.

    Args:
        handler: Handler function to wrap

    Returns:
        Wrapped handler returning an exit status
    """
    @wraps(handler)
    def wrapper(args: argparse.Namespace) -> int:
        try:
            return handler(args)

        except (UsageError, ValidationError) as e:
            logger.error(f"Usage error in {handler.__name__}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE

        except (DataError, DomainError, ResourceLimitError) as e:
            logger.error(f"{type(e).__name__} in {handler.__name__}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_DATA

        except Exception as e:
            logger.error(
                f"Error in handler {handler.__name__}: {e}",
                exc_info=True
            )
            # Re-raise in debug mode
            if settings.debug:
                raise
            print(f"error: {e}", file=sys.stderr)
            return exit_code_for(e)

    return wrapper


def with_logging(handler: Handler) -> Handler:
    """
    Decorator for logging handler calls.

    Args:
        handler: Handler function to wrap

    Returns:
        Wrapped handler function with logging
    """
    @wraps(handler)
    def wrapper(args: argparse.Namespace) -> int:
        options = {k: v for k, v in vars(args).items() if k != "handler"}
        logger.info(f"Handler: {handler.__name__} | Args: {options}")

        start_time = time.time()

        try:
            status = handler(args)
            duration = time.time() - start_time
            logger.info(
                f"Handler {handler.__name__} finished in {duration:.2f}s with status {status}"
            )
            return status

        except Exception as e:
            duration = time.time() - start_time
            logger.error(
                f"Handler {handler.__name__} failed after {duration:.2f}s: {e}"
            )
            raise

    return wrapper


def with_middleware(handler: Handler) -> Handler:
    """
    Decorator applying all middleware to a handler.

    Order:
    1. Logging
    2. Error handling
    """
    return with_logging(with_error_handler(handler))


__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_DATA",
    "exit_code_for",
    "with_middleware",
    "with_error_handler",
    "with_logging",
]
