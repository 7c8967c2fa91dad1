import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mint_tta.autodiff import (
    GradientMap,
    Parameter,
    Tape,
    backward,
    concat,
    constant,
    cosine,
    cosine_matrix,
    entropy,
    gelu,
    layer_norm,
    log,
    matmul,
    ops,
    reshape,
    scale,
    softmax,
    take,
    transpose,
)
from mint_tta.errors import ContractError, NonFiniteError, ShapeError


def numeric_gradient(func, value: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(value)
    for index in np.ndindex(value.shape):
        plus, minus = value.copy(), value.copy()
        plus[index] += step
        minus[index] -= step
        grad[index] = (func(plus) - func(minus)) / (2 * step)
    return grad


def check_op(build, value: np.ndarray, tol: float = 1e-6):
    """`build` maps a tensor to a scalar loss; compares the tape gradient with central differences"""
    leaf = Parameter("x", value)

    with Tape() as tape:
        loss = build(leaf.track())
        gradients = backward(loss, tape)

    expected = numeric_gradient(lambda v: build(constant(v)).item(), value)
    assert_allclose(gradients["x"], expected, rtol=tol, atol=tol)


def test_elementwise_and_matmul_gradients(rng):
    weights = rng.standard_normal((4, 3))
    check_op(lambda x: ops.sum(matmul(x, weights) * matmul(x, weights)), rng.standard_normal((2, 4)))
    check_op(lambda x: ops.sum(x - 0.5 * x * x), rng.standard_normal((3, 2)))
    check_op(lambda x: ops.mean(gelu(x)), rng.standard_normal((5,)))


def test_broadcast_gradients_are_unbroadcast(rng):
    row = rng.standard_normal((1, 3))
    check_op(lambda x: ops.sum((x + row) * (x + row)), rng.standard_normal((4, 3)))
    check_op(lambda x: ops.sum((row + x) * row), rng.standard_normal((3,)))


def test_shape_ops_gradients(rng):
    other = rng.standard_normal((2, 2, 3))
    ramp = np.arange(12.0).reshape(2, 6)
    check_op(lambda x: ops.sum(reshape(transpose(x, (1, 0, 2)), (2, 6)) * ramp), rng.standard_normal((2, 2, 3)))
    check_op(lambda x: ops.sum(concat([x, other], axis=1) * concat([other, x], axis=1)), rng.standard_normal((2, 2, 3)))
    check_op(lambda x: ops.sum(take(x, [0, 2, 2], axis=0) * 3.0), rng.standard_normal((3, 2)))


def test_softmax_entropy_gradient(rng):
    check_op(lambda x: ops.sum(entropy(softmax(x, axis=-1), axis=-1)), rng.standard_normal((3, 5)))


def test_cosine_and_layer_norm_gradients(rng):
    keys = rng.standard_normal((4, 6))
    check_op(lambda x: ops.sum(cosine_matrix(x, keys) * cosine_matrix(x, keys)), rng.standard_normal((3, 6)))
    gamma, beta = rng.standard_normal(6), rng.standard_normal(6)
    check_op(lambda x: ops.sum(layer_norm(x, gamma, beta) * keys[:1]), rng.standard_normal((2, 6)))
    check_op(lambda x: ops.mean(log(x * x + 1.0)), rng.standard_normal((4,)))


def test_softmax_rows_are_shift_invariant_distributions(rng):
    logits = rng.standard_normal((4, 7))
    probabilities = softmax(logits).data
    assert_allclose(probabilities.sum(axis=-1), 1.0, atol=1e-12)
    assert_allclose(softmax(logits + 5.0).data, probabilities, atol=1e-12)

    assert_allclose(softmax(np.log([1.0, 2.0, 3.0])).data, [1 / 6, 2 / 6, 3 / 6], atol=1e-12)


def test_matmul_matches_a_triple_loop(rng):
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 5))
    expected = np.zeros((3, 5))
    for i in range(3):
        for j in range(5):
            for k in range(4):
                expected[i, j] += a[i, k] * b[k, j]
    assert_allclose(matmul(a, b).data, expected, atol=1e-12)


def test_cosine_ignores_positive_scaling(rng):
    a, b = rng.standard_normal(6), rng.standard_normal(6)
    assert cosine(2.5 * a, 0.3 * b).item() == pytest.approx(cosine(a, b).item(), abs=1e-12)


def test_uniform_distribution_maximises_entropy(rng):
    ceiling = entropy(np.full(6, 1 / 6)).item()
    for _ in range(50):
        p = rng.dirichlet(np.ones(6))
        assert entropy(p).item() <= ceiling + 1e-12


def test_cosine_of_zero_vector_is_zero():
    assert cosine(np.zeros(4), np.ones(4)).item() == 0.0
    assert cosine(np.array([1.0, 0.0]), np.array([2.0, 0.0])).item() == pytest.approx(1.0)


def test_cosine_rejects_mismatched_widths():
    with pytest.raises(ShapeError, match=r"\(3,\) and \(4,\)"):
        cosine(np.ones(3), np.ones(4))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError) as error:
        matmul(np.ones((2, 3)), np.ones((4, 5)))
    assert "(2, 3)" in str(error.value) and "(4, 5)" in str(error.value)


def test_entropy_of_uniform_and_one_hot():
    assert entropy(np.full(10, 0.1)).item() == pytest.approx(math.log(10))
    assert entropy(np.array([0.0, 1.0, 0.0])).item() == 0.0


def test_entropy_rejects_non_distributions():
    with pytest.raises(ContractError):
        entropy(np.array([0.5, 0.6]))
    with pytest.raises(ContractError):
        entropy(np.array([1.5, -0.5]))


def test_backward_rejects_non_scalar_loss():
    leaf = Parameter("x", np.ones(3))
    with Tape() as tape:
        out = scale(leaf.track(), 2.0)
        with pytest.raises(ContractError):
            backward(out, tape)


def test_backward_of_a_parameter_is_ones():
    leaf = Parameter("x", np.array(2.0))
    gradients = backward(leaf.track())
    assert_allclose(gradients["x"], 1.0)


def test_constant_loss_has_no_gradients():
    with Tape() as tape:
        loss = ops.sum(constant(np.ones(3)) * 2.0)
        assert len(tape) == 0
        assert len(backward(loss, tape)) == 0


def test_frozen_parameters_receive_no_gradient(rng):
    trained = Parameter("trained", rng.standard_normal(3))
    frozen = Parameter("frozen", rng.standard_normal(3), trainable=False)

    with Tape() as tape:
        loss = ops.sum(trained.track() * frozen.track())
        gradients = backward(loss, tape)

    assert gradients.keys() == {"trained"}
    assert_allclose(gradients["trained"], frozen.value)


def test_shared_leaf_gradients_accumulate(rng):
    value = rng.standard_normal(4)
    leaf = Parameter("x", value)

    with Tape() as tape:
        x = leaf.track()
        loss = ops.sum(x * x) + ops.sum(scale(x, 3.0))
        gradients = backward(loss, tape)

    assert_allclose(gradients["x"], 2 * value + 3.0)


def test_non_finite_outputs_raise():
    with pytest.raises(NonFiniteError):
        scale(constant(np.array([1e308])), 10.0)


def test_parameter_values_are_read_only(rng):
    leaf = Parameter("x", rng.standard_normal(3))
    with pytest.raises(ValueError):
        leaf.value[0] = 1.0


def test_gradient_map_norm_and_finiteness():
    gradients = GradientMap({"a": np.array([3.0]), "b": np.array([[4.0]])})
    assert gradients.norm() == pytest.approx(5.0)
    assert gradients.is_finite
    assert not GradientMap({"a": np.array([np.nan])}).is_finite
