"""
Module container and the transformer building blocks shared by the
encoders and the point adapters.
"""

import math
import zlib
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from autodiff import Parameter, Tensor, gelu, layer_norm, softmax
from errors import ConfigurationError, DimensionError

INIT_STD = 0.02


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent generator per named stream, stable across runs."""
    return np.random.default_rng([seed, zlib.crc32(stream.encode("utf-8"))])


def gaussian(rng: np.random.Generator, shape, std: float = INIT_STD) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class Module:
    """Tree of Parameters and child Modules, registered by attribute name."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, key, value):
        self._params.pop(key, None)
        self._children.pop(key, None)
        if isinstance(value, Parameter):
            self._params[key] = value
        elif isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for key, param in self._params.items():
            yield f"{prefix}{key}", param
        for key, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{key}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters() if p.trainable]

    def set_trainable(self, trainable: bool) -> None:
        for param in self.parameters():
            param.trainable = trainable

    def bind_names(self, prefix: str = "") -> None:
        """Store each Parameter's full dotted path on it; paths must be unique."""
        seen: Dict[int, str] = {}
        for name, param in self.named_parameters(prefix):
            if id(param) in seen:
                raise ConfigurationError(f"parameter shared between '{seen[id(param)]}' and '{name}'")
            seen[id(param)] = name
            param.name = name

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad = None


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(gaussian(rng, (in_features, out_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise DimensionError("linear input width", x.shape, self.weight.shape)
        if x.ndim == 1:
            out = (x.reshape(1, self.in_features) @ self.weight).reshape(self.out_features)
        else:
            out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.weight, self.bias, self.eps)


class Mlp(Module):
    """Two linear layers with GELU between."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator, approximate: str = "tanh"):
        super().__init__()
        self.approximate = approximate
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x), self.approximate))


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % heads:
            raise ConfigurationError(f"width {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = Linear(dim, 3 * dim, rng)
        self.proj = Linear(dim, dim, rng)
        self.last_attention: Optional[np.ndarray] = None

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        """
        Self-attention over x [B, L, dim].

        `mask` is a boolean [L, L] array; mask[i, j] False hides key j from
        query i.
        """
        batch, length, _ = x.shape
        qkv = self.qkv(x).reshape(batch, length, 3, self.heads, self.head_dim).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.swap_last()) * (1.0 / math.sqrt(self.head_dim))
        weights = softmax(scores, axis=-1, mask=mask)
        self.last_attention = weights.data
        out = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, length, self.dim)
        return self.proj(out)


class TransformerBlock(Module):
    """Pre-norm block: x + MSA(LN(x)), then x + MLP(LN(x))."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, mlp_ratio: int = 4, approximate: str = "tanh"):
        super().__init__()
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.ln2 = LayerNorm(dim)
        self.mlp = Mlp(dim, mlp_ratio * dim, rng, approximate)

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        x = x + self.attn(self.ln1(x), mask)
        return x + self.mlp(self.ln2(x))
