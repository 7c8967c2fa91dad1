"""Differentiable operations. Every op checks its output for finiteness and records itself on the active tape"""

from typing import Sequence

import numpy as np

from ..errors import ContractError, ShapeError
from .tensor import DTYPE, Tensor, constant, make_node

COSINE_EPS = 1e-12
LAYER_NORM_EPS = 1e-5
ENTROPY_TOLERANCE = 1e-6

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_K = 0.044715


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sums `grad` over the axes numpy broadcasting added or stretched to reach its shape"""
    if grad.shape == shape:
        return grad

    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)

    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)

    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def add(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return make_node("add", a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return make_node("sub", a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_node("mul", a.data * b.data, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return make_node("scale", a.data * factor, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape) from None

    def backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return (
            unbroadcast(grad_a, a.shape) if grad_a is not None else None,
            unbroadcast(grad_b, b.shape) if grad_b is not None else None,
        )

    return make_node("matmul", out, (a, b), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None

    def backward(g):
        return (g.reshape(a.shape),)

    return make_node("reshape", out, (a,), backward)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return make_node("transpose", np.transpose(a.data, axes), (a,), backward)


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError("broadcast_to", a.shape, shape) from None

    def backward(g):
        return (unbroadcast(g, a.shape),)

    return make_node("broadcast_to", np.array(out), (a,), backward)


def sum(a: Tensor, axis: int | None = None) -> Tensor:
    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_node("sum", np.sum(a.data, axis=axis), (a,), backward)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return make_node("mean", np.mean(a.data, axis=axis), (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -2) -> Tensor:
    tensors = tuple(constant(t) for t in tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in tensors)) from None

    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node("concat", out, tensors, backward)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Row gather along `axis`. Indices are constants of the graph"""
    indices = np.asarray(indices, dtype=np.intp)
    extent = a.shape[axis]
    if indices.size and (indices.min() < -extent or indices.max() >= extent):
        raise ContractError(f"take: index out of range for axis of extent {extent}")

    def backward(g):
        grad = np.zeros(a.shape, dtype=DTYPE)
        np.add.at(np.moveaxis(grad, axis, 0), indices, np.moveaxis(g, axis, 0))
        return (grad,)

    return make_node("take", np.take(a.data, indices, axis=axis), (a,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = constant(x)
    if not -x.ndim <= axis < x.ndim:
        raise ContractError(f"softmax: axis {axis} invalid for shape {x.shape}")

    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    out = exps / np.sum(exps, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return make_node("softmax", out, (x,), backward)


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """
    Pairwise cosine similarity of the rows of `a` (M x D) and `b` (N x D):
    a_m . b_n / (|a_m| |b_n| + eps). Zero-norm rows give 0
    """
    a, b = constant(a), constant(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError("cosine", a.shape, b.shape)

    # einsum keeps every output element an independent, identically ordered dot product
    dots = np.einsum("md,nd->mn", a.data, b.data)
    norm_a = np.sqrt(np.einsum("md,md->m", a.data, a.data))
    norm_b = np.sqrt(np.einsum("nd,nd->n", b.data, b.data))
    denom = norm_a[:, None] * norm_b[None, :] + COSINE_EPS
    out = dots / denom

    def backward(g):
        coeff = g / denom
        ratio = g * dots / (denom * denom)
        unit_a = np.divide(a.data, norm_a[:, None], out=np.zeros_like(a.data), where=norm_a[:, None] > 0)
        unit_b = np.divide(b.data, norm_b[:, None], out=np.zeros_like(b.data), where=norm_b[:, None] > 0)
        grad_a = coeff @ b.data - (ratio @ norm_b)[:, None] * unit_a
        grad_b = coeff.T @ a.data - (ratio.T @ norm_a)[:, None] * unit_b
        return grad_a, grad_b

    return make_node("cosine", out, (a, b), backward)


def cosine(a: Tensor, b: Tensor) -> Tensor:
    a, b = constant(a), constant(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeError("cosine", a.shape, b.shape)
    matrix = cosine_matrix(reshape(a, (1, -1)), reshape(b, (1, -1)))
    return reshape(matrix, ())


def entropy(p: Tensor, axis: int = -1) -> Tensor:
    """Shannon entropy -sum p log p along `axis`, with 0 log 0 := 0"""
    p = constant(p)
    if (p.data < 0).any() or not np.allclose(np.sum(p.data, axis=axis), 1.0, rtol=0, atol=ENTROPY_TOLERANCE):
        raise ContractError("entropy expects probability vectors (nonnegative, summing to 1)")

    positive = p.data > 0
    log_p = np.log(p.data, out=np.zeros_like(p.data), where=positive)
    out = -np.sum(p.data * log_p, axis=axis)

    def backward(g):
        return (np.where(positive, -(log_p + 1.0), 0.0) * np.expand_dims(g, axis),)

    return make_node("entropy", out, (p,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    x, gamma, beta = constant(x), constant(gamma), constant(beta)
    if gamma.shape != (x.shape[-1],) or beta.shape != gamma.shape:
        raise ShapeError("layer_norm", x.shape, gamma.shape)

    mu = np.mean(x.data, axis=-1, keepdims=True)
    centered = x.data - mu
    inv_sigma = 1.0 / np.sqrt(np.mean(centered * centered, axis=-1, keepdims=True) + LAYER_NORM_EPS)
    x_hat = centered * inv_sigma

    def backward(g):
        d_hat = g * gamma.data
        grad_x = inv_sigma * (
            d_hat - np.mean(d_hat, axis=-1, keepdims=True) - x_hat * np.mean(d_hat * x_hat, axis=-1, keepdims=True)
        )
        leading = tuple(range(g.ndim - 1))
        return grad_x, np.sum(g * x_hat, axis=leading), np.sum(g, axis=leading)

    return make_node("layer_norm", x_hat * gamma.data + beta.data, (x, gamma, beta), backward)


def gelu(x: Tensor) -> Tensor:
    """tanh approximation of GELU"""
    u = _GELU_C * (x.data + _GELU_K * x.data**3)
    t = np.tanh(u)

    def backward(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_K * x.data**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du),)

    return make_node("gelu", 0.5 * x.data * (1.0 + t), (x,), backward)


def log(x: Tensor) -> Tensor:
    x = constant(x)
    if (x.data <= 0).any():
        raise ContractError("log expects strictly positive inputs")

    def backward(g):
        return (g / x.data,)

    return make_node("log", np.log(x.data), (x,), backward)
