from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from ..autodiff import GradientMap
from ..errors import NonFiniteError
from ..utils import Result
from .config import AdaptConfig
from .params import MintParams


@dataclass(frozen=True)
class Moments:
    first: np.ndarray
    second: np.ndarray
    steps: int = 0


@dataclass(frozen=True)
class OptimizerState:
    """AdamW state: per-parameter moments and a global step counter"""

    moments: Mapping[str, Moments] = field(default_factory=dict)
    step: int = 0

    def without(self, parameter_ids: set[str]) -> "OptimizerState":
        kept = {key: value for key, value in self.moments.items() if key not in parameter_ids}
        return replace(self, moments=kept)


def adamw(
    value: np.ndarray, grad: np.ndarray, moments: Moments | None, config: AdaptConfig
) -> tuple[np.ndarray, Moments]:
    beta1, beta2 = config.betas
    if moments is None:
        moments = Moments(np.zeros_like(value), np.zeros_like(value))

    steps = moments.steps + 1
    first = beta1 * moments.first + (1.0 - beta1) * grad
    second = beta2 * moments.second + (1.0 - beta2) * grad * grad
    first_hat = first / (1.0 - beta1**steps)
    second_hat = second / (1.0 - beta2**steps)

    decayed = value * (1.0 - config.learning_rate * config.weight_decay)
    updated = decayed - config.learning_rate * first_hat / (np.sqrt(second_hat) + config.adam_eps)

    return updated, Moments(first, second, steps)


def adapt_step(
    params: MintParams, optimizer: OptimizerState, gradients: GradientMap, config: AdaptConfig
) -> Result[tuple[MintParams, OptimizerState], NonFiniteError]:
    """
    One decoupled-weight-decay Adam update of the parameters present in `gradients`. Non-finite gradients
    or updates leave `params` and `optimizer` untouched and come back as an error
    """
    if not gradients.is_finite:
        return Result.error(NonFiniteError("non-finite gradient"))

    current = params.arrays()
    arrays: dict[str, np.ndarray] = {}
    moments = dict(optimizer.moments)

    for parameter_id, grad in gradients.items():
        updated, moments[parameter_id] = adamw(current[parameter_id], grad, optimizer.moments.get(parameter_id), config)
        if not np.isfinite(updated).all():
            return Result.error(NonFiniteError(f"update of {parameter_id} is not finite"))
        arrays[parameter_id] = updated

    return Result.ok((params.with_arrays(arrays), OptimizerState(moments, optimizer.step + 1)))
