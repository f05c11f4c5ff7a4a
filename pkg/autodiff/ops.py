"""
Differentiable functions built on Tensor: softmax family, GELU, layer norm
and cosine similarity.
"""

import math
from typing import Optional

import numpy as np

from autodiff.tensor import Tensor, as_tensor, matmul, unbroadcast
from errors import ArgumentError, DegenerateVectorError, DimensionError, NumericDomainError

GELU_TANH = "tanh"
GELU_EXACT = "exact"

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_CUBIC = 0.044715
_erf = np.vectorize(math.erf, otypes=[np.float64])


def _require_finite(x: Tensor, op: str) -> None:
    if not np.all(np.isfinite(x.data)):
        raise NumericDomainError(f"{op} received a non-finite input")


def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Numerically stable softmax along `axis`.

    Args:
        x: Input logits (finite)
        axis: Normalization axis
        mask: Optional boolean array broadcastable to x; False entries get
            probability exactly 0

    Returns:
        Tensor of the same shape whose slices along `axis` sum to 1
    """
    x = as_tensor(x)
    _require_finite(x, "softmax")
    logits = x.data
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return Tensor._result(y, (x,), "softmax", backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    _require_finite(x, "log_softmax")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    y = np.exp(out)

    def backward(g):
        return (g - y * np.sum(g, axis=axis, keepdims=True),)

    return Tensor._result(out, (x,), "log_softmax", backward)


def gelu(x: Tensor, approximate: str = GELU_TANH) -> Tensor:
    """Gaussian error linear unit; tanh approximation unless approximate='exact'."""
    x = as_tensor(x)
    a = x.data
    if approximate == GELU_TANH:
        inner = _SQRT_2_OVER_PI * (a + _GELU_CUBIC * a ** 3)
        t = np.tanh(inner)
        out = 0.5 * a * (1.0 + t)
        slope = 0.5 * (1.0 + t) + 0.5 * a * (1.0 - t * t) * _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_CUBIC * a * a)
    elif approximate == GELU_EXACT:
        cdf = 0.5 * (1.0 + _erf(a / math.sqrt(2.0)))
        pdf = np.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
        out = a * cdf
        slope = cdf + a * pdf
    else:
        raise ArgumentError(f"unknown GELU approximation '{approximate}'")
    return Tensor._result(out, (x,), "gelu", lambda g: (g * slope,))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize over the last axis, then scale by gamma and shift by beta."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError("layer_norm affine shape", x.shape, gamma.shape, beta.shape)
    if eps <= 0:
        raise ArgumentError("layer_norm eps must be positive")

    a = x.data
    mu = a.mean(axis=-1, keepdims=True)
    centered = a - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g):
        dxhat = g * gamma.data
        dx = inv_std / d * (
            d * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return dx, unbroadcast(g * xhat, gamma.shape), unbroadcast(g, beta.shape)

    return Tensor._result(out, (x, gamma, beta), "layer_norm", backward)


def _norms(x: Tensor) -> Tensor:
    norms = np.sqrt(np.sum(x.data * x.data, axis=-1))
    if np.any(norms == 0):
        raise DegenerateVectorError("cosine similarity of a zero-norm vector")
    return (x * x).sum(axis=-1, keepdims=True).sqrt()


def normalize(x: Tensor) -> Tensor:
    """Scale every vector along the last axis to unit Euclidean norm."""
    x = as_tensor(x)
    return x / _norms(x)


def cosine_similarity(u: Tensor, v: Tensor) -> Tensor:
    """u.v / (|u| |v|) along the last axis."""
    u, v = as_tensor(u), as_tensor(v)
    if u.shape[-1] != v.shape[-1]:
        raise DimensionError("cosine_similarity width", u.shape, v.shape)
    return (normalize(u) * normalize(v)).sum(axis=-1)


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """S[i, k] = cosine_similarity(a[i], b[k]) for row matrices a, b."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError("cosine_matrix width", a.shape, b.shape)
    return matmul(normalize(a), normalize(b).T)
