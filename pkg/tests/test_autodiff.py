import math
import threading

import numpy as np
import pytest

from autodiff import (
    Parameter,
    Tensor,
    concat,
    cosine_matrix,
    cosine_similarity,
    gelu,
    grad_check,
    layer_norm,
    log_softmax,
    matmul,
    no_grad,
    normalize,
    softmax,
    stack,
)
from autodiff.ops import GELU_EXACT
from errors import ContractError, DegenerateVectorError, DimensionError, NumericDomainError

CASES = 20


# ----------------------------------------------------------------------
# matmul


def test_matmul_hand_arithmetic():
    out = matmul(Tensor([[1, 2], [3, 4]]), Tensor([[5, 6], [7, 8]]))
    np.testing.assert_array_equal(out.data, [[19, 22], [43, 50]])


def test_matmul_identity_and_zero():
    a = Tensor(np.random.default_rng(0).normal(size=(3, 3)))
    np.testing.assert_array_equal((a @ Tensor(np.eye(3))).data, a.data)
    np.testing.assert_array_equal((a @ Tensor(np.zeros((3, 2)))).data, np.zeros((3, 2)))


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\) vs \(2, 3\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_backward_formulas():
    rng = np.random.default_rng(1)
    a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    g = rng.normal(size=(2, 4))
    (matmul(a, b) * Tensor(g)).sum().backward()
    np.testing.assert_allclose(a.grad, g @ b.data.T, atol=1e-12)
    np.testing.assert_allclose(b.grad, a.data.T @ g, atol=1e-12)


# ----------------------------------------------------------------------
# softmax


def test_softmax_symmetric_input():
    np.testing.assert_allclose(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5], atol=1e-15)


def test_softmax_closed_form():
    np.testing.assert_allclose(softmax(Tensor([math.log(2), 0.0])).data, [2 / 3, 1 / 3], atol=1e-12)


def test_softmax_shift_invariance_and_normalization():
    rng = np.random.default_rng(2)
    for _ in range(CASES):
        x = rng.normal(size=(4, 6)) * 5
        y = softmax(Tensor(x), axis=-1).data
        np.testing.assert_allclose(softmax(Tensor(x + 3.7), axis=-1).data, y, atol=1e-12)
        np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(y > 0)


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericDomainError):
        softmax(Tensor([0.0, np.nan]))
    with pytest.raises(NumericDomainError):
        softmax(Tensor([np.inf, 0.0]))


# ----------------------------------------------------------------------
# cosine similarity


def test_cosine_self_similarity():
    u = Tensor([0.3, -2.0, 1.5])
    assert cosine_similarity(u, u).item() == pytest.approx(1.0, abs=1e-12)


def test_cosine_orthogonal_and_closed_form():
    assert cosine_similarity(Tensor([1.0, 0.0]), Tensor([0.0, 1.0])).item() == pytest.approx(0.0, abs=1e-15)
    assert cosine_similarity(Tensor([1.0, 2.0]), Tensor([2.0, 1.0])).item() == pytest.approx(0.8, abs=1e-12)


def test_cosine_zero_norm_is_an_error():
    with pytest.raises(DegenerateVectorError):
        cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 0.0]))


def test_cosine_matrix_width_mismatch():
    with pytest.raises(DimensionError):
        cosine_matrix(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))))


# ----------------------------------------------------------------------
# layer norm and gelu


def test_layer_norm_constant_row_is_zero():
    out = layer_norm(Tensor([[3.0, 3.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, np.zeros((1, 3)))


def test_layer_norm_already_standard():
    out = layer_norm(Tensor([1.0, -1.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
    np.testing.assert_allclose(out.data, [1.0, -1.0], atol=1e-9)


def test_layer_norm_moments_and_beta_offset():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(5, 7)) * 3 + 2)
    ones, zeros = Tensor(np.ones(7)), Tensor(np.zeros(7))
    out = layer_norm(x, ones, zeros, eps=1e-12).data
    np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-9)
    np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-9)

    beta = rng.normal(size=7)
    shifted = layer_norm(x, ones, Tensor(beta)).data
    np.testing.assert_allclose(shifted, layer_norm(x, ones, zeros).data + beta, atol=1e-12)


def test_layer_norm_shape_check():
    with pytest.raises(DimensionError):
        layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(4)), Tensor(np.zeros(4)))


@pytest.mark.parametrize("approximate", ["tanh", GELU_EXACT])
def test_gelu_fixed_points(approximate):
    assert gelu(Tensor([0.0]), approximate).item() == 0.0
    for x in (6.0, 8.0, 12.0):
        assert gelu(Tensor([x]), approximate).item() == pytest.approx(x, abs=1e-6)


def test_gelu_at_one():
    assert gelu(Tensor([1.0]), GELU_EXACT).item() == pytest.approx(0.841345, abs=1e-6)
    assert gelu(Tensor([1.0])).item() == pytest.approx(0.8412, abs=1e-3)


# ----------------------------------------------------------------------
# backward


def test_backward_of_sum_is_ones():
    p = Parameter(np.arange(6.0).reshape(2, 3))
    p.sum().backward()
    np.testing.assert_array_equal(p.grad, np.ones((2, 3)))


def test_backward_of_dot_product():
    p = Parameter([1.0, -2.0, 0.5])
    (p * p).sum().backward()
    np.testing.assert_allclose(p.grad, 2 * p.data)


def test_backward_requires_scalar():
    p = Parameter(np.ones(3))
    with pytest.raises(ContractError):
        (p * 2).backward()


def test_backward_leaves_unreachable_grads_untouched():
    p, q = Parameter(np.ones(2)), Parameter(np.ones(2))
    q.grad = np.full(2, 7.0)
    p.sum().backward()
    np.testing.assert_array_equal(q.grad, [7.0, 7.0])


def test_repeated_backward_accumulates():
    p = Parameter([1.0, 2.0])
    loss = (p * p).sum()
    loss.backward()
    loss.backward()
    np.testing.assert_allclose(p.grad, 4 * p.data)


def test_shared_subexpression_gradients_add():
    p = Parameter([3.0])
    y = p * 2
    (y + y * y).sum().backward()
    # d/dp (2p + 4p^2) = 2 + 8p
    np.testing.assert_allclose(p.grad, [26.0])


def test_no_grad_records_nothing():
    p = Parameter(np.ones(3))
    with no_grad():
        out = (p * 2).sum()
    assert not out.requires_grad
    out.backward()
    assert p.grad is None


def test_no_grad_is_per_thread():
    p = Parameter(np.ones(3))
    seen = {}

    def other_thread():
        seen["requires_grad"] = (p * 2).requires_grad

    with no_grad():
        worker = threading.Thread(target=other_thread)
        worker.start()
        worker.join()
    assert seen["requires_grad"] is True


def test_non_finite_results_fail_fast():
    with pytest.raises(NumericDomainError):
        Tensor([1e308]) * 10
    with pytest.raises(NumericDomainError):
        Tensor([0.0, 1.0]).log()


def test_frozen_parameter_records_no_gradient():
    p = Parameter(np.ones(2), trainable=False)
    assert not p.requires_grad
    out = (p * 3).sum()
    assert not out.requires_grad


def test_parameter_digest_tracks_values():
    p = Parameter(np.arange(4.0))
    before = p.digest()
    assert Parameter(np.arange(4.0)).digest() == before
    p.data = p.data + 1e-12
    assert p.digest() != before


def test_item_needs_single_element():
    with pytest.raises(ContractError):
        Tensor([1.0, 2.0]).item()


def test_forward_is_deterministic():
    x = np.random.default_rng(4).normal(size=(3, 5))
    a = layer_norm(gelu(Tensor(x)), Tensor(np.ones(5)), Tensor(np.zeros(5))).data
    b = layer_norm(gelu(Tensor(x)), Tensor(np.ones(5)), Tensor(np.zeros(5))).data
    np.testing.assert_array_equal(a, b)


# ----------------------------------------------------------------------
# finite-difference checks


def test_grad_check_of_sum():
    rng = np.random.default_rng(5)
    for _ in range(CASES):
        assert grad_check(lambda t: t.sum(), Tensor(rng.normal(size=(3, 4)))) <= 1e-10


def test_grad_check_softmax_first_entry():
    rng = np.random.default_rng(6)
    for _ in range(CASES):
        assert grad_check(lambda t: softmax(t)[0], Tensor(rng.normal(size=5))) <= 1e-4


OPS = {
    "softmax": lambda x: softmax(x, axis=-1),
    "softmax_axis0": lambda x: softmax(x, axis=0),
    "log_softmax": lambda x: log_softmax(x, axis=-1),
    "gelu_tanh": lambda x: gelu(x),
    "gelu_exact": lambda x: gelu(x, GELU_EXACT),
    "layer_norm": lambda x: layer_norm(x, Tensor(np.linspace(0.5, 1.5, 4)), Tensor(np.linspace(-0.2, 0.2, 4))),
    "normalize": normalize,
    "cosine_matrix": lambda x: cosine_matrix(x, Tensor(np.arange(8.0).reshape(2, 4) + 1)),
    "matmul": lambda x: x @ Tensor(np.linspace(-1, 1, 8).reshape(4, 2)),
    "tanh": lambda x: x.tanh(),
    "exp": lambda x: (x * 0.5).exp(),
    "log": lambda x: (x * x + 1.0).log(),
    "sqrt": lambda x: (x * x + 1.0).sqrt(),
    "div": lambda x: x / (x * x + 2.0),
    "max": lambda x: x.max(axis=1),
    "mean": lambda x: x.mean(axis=0),
    "transpose": lambda x: x.T @ Tensor(np.ones((3, 2))),
    "getitem": lambda x: x[[0, 2], 1:3],
    "stack_concat": lambda x: concat([x, stack([x[0], x[1]])], axis=0),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_grad_check_every_operation(name):
    op = OPS[name]
    rng = np.random.default_rng(sorted(OPS).index(name))
    for _ in range(CASES):
        x = Tensor(rng.normal(size=(3, 4)))
        weights = Tensor(rng.normal(size=op(x).shape))
        assert grad_check(lambda t: (op(t) * weights).sum(), x) <= 1e-4, name
