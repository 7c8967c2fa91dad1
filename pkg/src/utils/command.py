import logging
from functools import wraps
from typing import Callable, TypeAlias

from ..errors import MintError
from .result import Result

logger = logging.getLogger(__name__)

ExitCode: TypeAlias = int

EXIT_OK: ExitCode = 0
EXIT_USAGE: ExitCode = 1
EXIT_IO: ExitCode = 2


def exit_code_of(error: object) -> ExitCode:
    return EXIT_IO if isinstance(error, OSError) else EXIT_USAGE


def command_do(func: Callable[..., object]) -> Callable[..., ExitCode]:
    """Runs a CLI command body as `Result.do` and maps the outcome onto a process exit code"""
    func = Result.do(catch=(MintError, OSError))(func)

    @wraps(func)
    def wrapper(*args, **kwargs) -> ExitCode:
        try:
            result = func(*args, **kwargs)
        except Exception:
            logger.exception("unexpected failure")
            return EXIT_USAGE

        if result.is_error:
            error = result.unwrap_error()
            logger.error("%s", error)
            return exit_code_of(error)

        status = result.unwrap()
        return status if isinstance(status, int) else EXIT_OK

    return wrapper
