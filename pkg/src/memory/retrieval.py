from dataclasses import dataclass

import numpy as np

from ..autodiff import cosine_matrix
from ..errors import ConfigError, ShapeError
from .bank import MemoryPromptBank


@dataclass(frozen=True)
class LayerSelection:
    indices: tuple[int, ...]
    "selected bank indices, by descending similarity, ties to the lower index"

    scores: tuple[float, ...]


@dataclass(frozen=True)
class RetrievalResult:
    layers: tuple[LayerSelection, ...]

    @property
    def union(self) -> tuple[int, ...]:
        return tuple(sorted({index for layer in self.layers for index in layer.indices}))

    def to_json(self) -> list[list[int]]:
        return [list(layer.indices) for layer in self.layers]


def similarity_scores(bank: MemoryPromptBank, queries: np.ndarray) -> np.ndarray:
    """S(q, k_i) for every row of `queries` (M, D_I) against every key. (M, N_MPB)"""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != bank.width:
        raise ShapeError("retrieve", queries.shape, bank.keys.shape)
    return cosine_matrix(queries, bank.keys.value).data


def top_indices(scores: np.ndarray, count: int) -> np.ndarray:
    """Row-wise indices of the `count` largest scores; a stable sort keeps ties in index order"""
    return np.argsort(-scores, axis=-1, kind="stable")[..., :count]


def _check_selection_size(bank: MemoryPromptBank, count: int):
    if not 1 <= count <= bank.size:
        raise ConfigError(f"N_sel must lie in [1, {bank.size}], got {count}")


def retrieve(bank: MemoryPromptBank, query, count: int) -> LayerSelection:
    _check_selection_size(bank, count)
    scores = similarity_scores(bank, np.reshape(query, (1, -1)))[0]
    indices = top_indices(scores, count)
    return LayerSelection(tuple(int(i) for i in indices), tuple(float(scores[i]) for i in indices))


def retrieve_views(bank: MemoryPromptBank, queries: np.ndarray, count: int) -> list[RetrievalResult]:
    """Retrieval for a (B, N_layers, D_I) stack of per-view hierarchical queries"""
    _check_selection_size(bank, count)
    views, layers, width = queries.shape
    scores = similarity_scores(bank, queries.reshape(views * layers, width)).reshape(views, layers, -1)
    indices = top_indices(scores, count)

    return [
        RetrievalResult(
            tuple(
                LayerSelection(
                    tuple(int(i) for i in indices[view, layer]),
                    tuple(float(scores[view, layer, i]) for i in indices[view, layer]),
                )
                for layer in range(layers)
            )
        )
        for view in range(views)
    ]
