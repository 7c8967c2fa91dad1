import logging
from contextvars import ContextVar
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from ..errors import ContractError, NonFiniteError

logger = logging.getLogger(__name__)

DTYPE = np.float64

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_ACTIVE_TAPE: ContextVar["Tape | None"] = ContextVar("mint_tta_tape", default=None)


def as_array(data) -> np.ndarray:
    return np.asarray(data, dtype=DTYPE)


def frozen_array(data) -> np.ndarray:
    array = np.array(data, dtype=DTYPE, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Parameter:
    id: str
    value: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "value", frozen_array(self.value))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def with_value(self, value: np.ndarray) -> "Parameter":
        return replace(self, value=value)

    def track(self) -> "Tensor":
        """Leaf node bound to this parameter. Frozen parameters come back as plain constants"""
        if not self.trainable:
            return Tensor(self.value)
        return Tensor(self.value, requires_grad=True, parameter=self)


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "parameter")

    # ndarray operands defer to the reflected Tensor operators
    __array_ufunc__ = None

    def __init__(
        self,
        data,
        *,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward_fn: BackwardFn | None = None,
        parameter: Parameter | None = None,
    ):
        self.data = as_array(data)
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.parameter = parameter

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        origin = f", parameter={self.parameter.id!r}" if self.parameter is not None else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{origin})"

    def __add__(self, other):
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import scale

        return scale(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)


def constant(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


class Tape:
    """Records differentiable ops while active. One tape per adaptation step, discarded after `backward`"""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._token = None

    def __enter__(self) -> "Tape":
        if self._token is not None:
            raise RuntimeError("tape is already active")
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *_):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Tensor):
        self.nodes.append(node)


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def make_node(op: str, data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    data = as_array(data)
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values")

    tape = active_tape()
    if tape is None or not any(parent.requires_grad for parent in parents):
        return Tensor(data)

    node = Tensor(data, requires_grad=True, parents=tuple(parents), backward_fn=backward_fn)
    tape.record(node)
    return node


@dataclass(frozen=True)
class GradientMap:
    entries: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, parameter_id: str) -> np.ndarray:
        return self.entries[parameter_id]

    def __contains__(self, parameter_id: str) -> bool:
        return parameter_id in self.entries

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def keys(self) -> set[str]:
        return set(self.entries)

    def items(self):
        return self.entries.items()

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.entries.values())))

    @property
    def is_finite(self) -> bool:
        return all(np.isfinite(g).all() for g in self.entries.values())


def backward(loss: Tensor, tape: Tape | None = None) -> GradientMap:
    """Reverse-mode gradients of a scalar `loss` w.r.t. every trainable leaf reachable from it"""
    if loss.data.size != 1 or loss.data.ndim > 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")

    if loss.parameter is not None:
        return GradientMap({loss.parameter.id: np.ones(loss.parameter.shape, dtype=DTYPE)})

    if not loss.requires_grad:
        return GradientMap({})

    tape = tape if tape is not None else active_tape()
    if tape is None:
        raise ContractError("backward needs the tape the loss was recorded on")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaf_grads: dict[str, np.ndarray] = {}
    leaf_shapes: dict[str, tuple[int, ...]] = {}

    for node in reversed(tape.nodes):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue

        for parent, parent_grad in zip(node.parents, node.backward_fn(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue

            if parent.parameter is not None:
                parameter_id = parent.parameter.id
                leaf_shapes[parameter_id] = parent.parameter.shape
                previous = leaf_grads.get(parameter_id)
                leaf_grads[parameter_id] = parent_grad if previous is None else previous + parent_grad
            else:
                previous = grads.get(id(parent))
                grads[id(parent)] = parent_grad if previous is None else previous + parent_grad

    for parameter_id, grad in leaf_grads.items():
        if grad.shape != leaf_shapes[parameter_id]:
            expected = leaf_shapes[parameter_id]
            raise ContractError(f"gradient of {parameter_id} has shape {grad.shape}, expected {expected}")
        if not np.isfinite(grad).all():
            raise NonFiniteError(f"gradient of {parameter_id} is not finite")

    logger.debug("backward over %d recorded nodes, %d leaves", len(tape), len(leaf_grads))

    return GradientMap(leaf_grads)
