from typing import Sequence

import numpy as np

from ..autodiff import Parameter, Tensor, concat, constant, cosine_matrix, mul, ops, reshape
from .bank import MemoryPromptBank
from .retrieval import RetrievalResult


def selection_mask(retrievals: Sequence[RetrievalResult], bank_size: int) -> np.ndarray:
    """(B * N_layers, N_MPB) indicator of the keys each view/layer selected"""
    layers = len(retrievals[0].layers)
    mask = np.zeros((len(retrievals) * layers, bank_size))

    for view, retrieval in enumerate(retrievals):
        for layer, selection in enumerate(retrieval.layers):
            mask[view * layers + layer, list(selection.indices)] = 1.0

    return mask


def similarity_rewards(queries, keys: Parameter | Tensor, retrievals: Sequence[RetrievalResult]) -> Tensor:
    """
    Per-view sum over layers of S(q^(l), k) for the selected keys, (B,).
    Queries are (B, N_layers, D_I); unselected keys get exactly zero gradient
    """
    keys = keys.track() if isinstance(keys, Parameter) else constant(keys)
    queries = constant(queries)
    views, layers, width = queries.shape

    similarities = cosine_matrix(reshape(queries, (views * layers, width)), keys)
    selected = mul(similarities, selection_mask(retrievals, keys.shape[0]))

    return ops.sum(reshape(selected, (views, layers * keys.shape[0])), axis=1)


def similarity_reward(queries: Sequence, bank: MemoryPromptBank, selections: RetrievalResult) -> Tensor:
    """Scalar reward of one view, queries given per designated layer"""
    rows = [reshape(constant(q), (1, -1)) for q in queries]
    stacked = reshape(concat(rows, axis=0), (1, len(rows), rows[0].shape[1]))
    rewards = similarity_rewards(stacked, bank.keys, [selections])
    return reshape(rewards, ())
