"""Autodiff package - dense tensors with reverse-mode differentiation."""

from autodiff.tensor import Tensor, as_tensor, concat, matmul, no_grad, stack
from autodiff.parameter import Parameter
from autodiff.ops import cosine_matrix, cosine_similarity, gelu, layer_norm, log_softmax, normalize, softmax
from autodiff.gradcheck import grad_check, grad_check_parameter

__all__ = [
    "Tensor",
    "Parameter",
    "as_tensor",
    "concat",
    "matmul",
    "no_grad",
    "stack",
    "cosine_matrix",
    "cosine_similarity",
    "gelu",
    "layer_norm",
    "log_softmax",
    "normalize",
    "softmax",
    "grad_check",
    "grad_check_parameter",
]
