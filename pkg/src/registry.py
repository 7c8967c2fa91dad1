from dataclasses import dataclass
from typing import Any, Callable, TypeVar

TFunc = TypeVar("TFunc", bound=Callable[..., Any])


@dataclass(frozen=True)
class RegisteredCommand:
    name: str
    help: str
    configure: Callable[[Any], None] | None
    run: Callable[..., int]


METHODS_TO_REGISTER: dict[str, Callable[..., Any]] = {}


COMMANDS_TO_REGISTER: dict[str, RegisteredCommand] = {}


def register_method(name: str):
    """Adds a benchmark method runner under `name` (the `method` column of reports)"""

    def decorator(func: TFunc) -> TFunc:
        if name in METHODS_TO_REGISTER:
            raise ValueError(f"method {name!r} is already registered")
        METHODS_TO_REGISTER[name] = func
        return func

    return decorator


def register_command(name: str, *, help: str, configure: Callable[[Any], None] | None = None):
    """Adds a CLI subcommand. `configure` receives the subparser to declare extra flags"""

    def decorator(func: TFunc) -> TFunc:
        COMMANDS_TO_REGISTER[name] = RegisteredCommand(name, help, configure, func)
        return func

    return decorator
