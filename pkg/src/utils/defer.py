from contextvars import ContextVar
from functools import partial, wraps
from typing import Any, Callable, ParamSpec

TParam = ParamSpec("TParam")

_DEFER_STACK: ContextVar[list[list[Callable[[], Any]]]] = ContextVar("mint_tta_defers")


def defer(callback: Callable[TParam, Any], *args: TParam.args, **kwargs: TParam.kwargs):
    """Schedules `callback` to run when the innermost `with_defers` function returns (LIFO order)"""
    frames = _DEFER_STACK.get(None)
    if not frames:
        raise RuntimeError("defer() called outside of a @with_defers function")

    if len(args) > 0 or len(kwargs) > 0:
        callback = partial(callback, *args, **kwargs)

    frames[-1].append(callback)


def with_defers(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        frames = _DEFER_STACK.get(None)
        token = None
        if frames is None:
            frames = []
            token = _DEFER_STACK.set(frames)

        frames.append([])
        try:
            return func(*args, **kwargs)
        finally:
            callbacks = frames.pop()
            if token is not None:
                _DEFER_STACK.reset(token)
            for callback in reversed(callbacks):
                callback()

    return wrapper
