from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ..autodiff import Parameter, Tensor, constant, matmul, reshape
from ..errors import ContractError
from .bank import MemoryPromptBank
from .retrieval import LayerSelection, RetrievalResult

UnionMode = Literal["set", "multiset"]


@dataclass(frozen=True)
class AssociativePrompt:
    prompt: Tensor
    "P_a, (L_m, D_I)"

    indices: tuple[int, ...]
    "contributing bank indices, deduplicated and ascending"


def selection_weights(
    retrievals: Sequence[RetrievalResult], bank_size: int, union_mode: UnionMode = "set"
) -> np.ndarray:
    """
    (B, N_MPB) averaging weights, one row per view. `set` averages the deduplicated union of every layer's
    selection, `multiset` counts a block once per layer that selected it
    """
    weights = np.zeros((len(retrievals), bank_size))

    for row, retrieval in enumerate(retrievals):
        if not retrieval.layers:
            raise ContractError("compose needs at least one layer selection")

        if union_mode == "set":
            union = list(retrieval.union)
            weights[row, union] = 1.0 / len(union)
        elif union_mode == "multiset":
            for layer in retrieval.layers:
                np.add.at(weights[row], list(layer.indices), 1.0)
            weights[row] /= weights[row].sum()
        else:
            raise ContractError(f"unknown union mode {union_mode!r}")

    return weights


def compose_views(
    retrievals: Sequence[RetrievalResult], values: Parameter | Tensor, union_mode: UnionMode = "set"
) -> Tensor:
    """Associative prompts for a batch of views, (B, L_m, D_I). Gradients reach only the averaged blocks"""
    values = values.track() if isinstance(values, Parameter) else constant(values)
    size, length, width = values.shape

    weights = selection_weights(retrievals, size, union_mode)
    flat_values = reshape(values, (size, length * width))

    return reshape(matmul(weights, flat_values), (len(retrievals), length, width))


def compose(
    selections: RetrievalResult | Sequence[LayerSelection], bank: MemoryPromptBank, union_mode: UnionMode = "set"
) -> AssociativePrompt:
    retrieval = selections if isinstance(selections, RetrievalResult) else RetrievalResult(tuple(selections))
    prompts = compose_views([retrieval], bank.values, union_mode)
    return AssociativePrompt(reshape(prompts, prompts.shape[1:]), retrieval.union)
