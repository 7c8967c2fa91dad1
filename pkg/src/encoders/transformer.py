import numpy as np

from ..autodiff import Tensor, add, gelu, layer_norm, matmul, ops, reshape, scale, softmax, transpose
from .weights import FrozenWeights


def linear(x: Tensor, weights: FrozenWeights, name: str) -> Tensor:
    return add(matmul(x, weights[f"{name}.weight"]), weights[f"{name}.bias"])


def norm(x: Tensor, weights: FrozenWeights, name: str) -> Tensor:
    return layer_norm(x, weights[f"{name}.gamma"], weights[f"{name}.beta"])


def self_attention(x: Tensor, weights: FrozenWeights, name: str, heads: int) -> Tensor:
    batch, tokens, width = x.shape
    head_width = width // heads

    def split_heads(projection: str) -> Tensor:
        projected = linear(x, weights, f"{name}.{projection}")
        return transpose(reshape(projected, (batch, tokens, heads, head_width)), (0, 2, 1, 3))

    query, key, value = split_heads("query"), split_heads("key"), split_heads("value")

    scores = scale(matmul(query, transpose(key, (0, 1, 3, 2))), 1.0 / np.sqrt(head_width))
    context = matmul(softmax(scores, axis=-1), value)
    merged = reshape(transpose(context, (0, 2, 1, 3)), (batch, tokens, width))

    return linear(merged, weights, f"{name}.out")


def block(x: Tensor, weights: FrozenWeights, name: str, heads: int) -> Tensor:
    """Pre-norm transformer block over a (batch, tokens, width) sequence"""
    x = add(x, self_attention(norm(x, weights, f"{name}.ln1"), weights, f"{name}.attn", heads))
    hidden = gelu(linear(norm(x, weights, f"{name}.ln2"), weights, f"{name}.mlp.fc1"))
    return add(x, linear(hidden, weights, f"{name}.mlp.fc2"))


def patchify(images: Tensor, grid: int, patch: int) -> Tensor:
    """(B, C, H, W) images → (B, grid*grid, C*patch*patch) patch rows, row-major over the grid"""
    batch, channels = images.shape[:2]
    tiles = reshape(images, (batch, channels, grid, patch, grid, patch))
    tiles = transpose(tiles, (0, 2, 4, 1, 3, 5))
    return reshape(tiles, (batch, grid * grid, channels * patch * patch))


def token_at(x: Tensor, index: int) -> Tensor:
    batch, _, width = x.shape
    return reshape(ops.take(x, [index], axis=1), (batch, width))
