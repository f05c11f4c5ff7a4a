"""
Point adapters applied to the pooled 3D feature h^P before projection.

`ffn` is a residual MLP with an input layer-norm; `ptb` is one pre-norm
transformer block run on the length-1 sequence [h^P].
"""

from typing import Optional

import numpy as np

from autodiff import Tensor, gelu
from encoders.layers import LayerNorm, Linear, Module, TransformerBlock
from errors import ArgumentError, ConfigurationError, DimensionError

ADAPTER_KINDS = ("none", "ffn", "ptb")


class FfnAdapter(Module):
    def __init__(self, width: int, rng: np.random.Generator, mlp_ratio: int = 4, approximate: str = "tanh"):
        super().__init__()
        self.width = width
        self.approximate = approximate
        self.ln = LayerNorm(width)
        self.fc1 = Linear(width, mlp_ratio * width, rng)
        self.fc2 = Linear(mlp_ratio * width, width, rng)

    def forward(self, h: Tensor) -> Tensor:
        return ffn_forward(self, h)


class PtbAdapter(TransformerBlock):
    def __init__(
        self, width: int, heads: int, rng: np.random.Generator, mlp_ratio: int = 4, approximate: str = "tanh"
    ):
        if width % heads:
            raise ConfigurationError(f"adapter width {width} is not divisible by {heads} heads")
        super().__init__(width, heads, rng, mlp_ratio, approximate)
        self.width = width

    def forward(self, h: Tensor) -> Tensor:
        return ptb_forward(self, h)


def _check_width(h: Tensor, width: int) -> None:
    if h.shape[-1] != width:
        raise DimensionError("adapter input width", h.shape, (width,))


def ffn_forward(adapter: FfnAdapter, h: Tensor) -> Tensor:
    """h + W2 gelu(W1 LN(h) + b1) + b2, for h of shape [D_point] or [B, D_point]."""
    _check_width(h, adapter.width)
    return h + adapter.fc2(gelu(adapter.fc1(adapter.ln(h)), adapter.approximate))


def ptb_forward(adapter: PtbAdapter, h: Tensor) -> Tensor:
    """Run each feature through the block as its own single-token sequence."""
    _check_width(h, adapter.width)
    single = h.ndim == 1
    batch = 1 if single else h.shape[0]
    out = TransformerBlock.forward(adapter, h.reshape(batch, 1, adapter.width))
    return out.reshape(adapter.width) if single else out.reshape(batch, adapter.width)


def build_adapter(
    kind: str,
    width: int,
    heads: int,
    rng: np.random.Generator,
    mlp_ratio: int = 4,
    approximate: str = "tanh",
) -> Optional[Module]:
    if kind == "none":
        return None
    if kind == "ffn":
        return FfnAdapter(width, rng, mlp_ratio, approximate)
    if kind == "ptb":
        return PtbAdapter(width, heads, rng, mlp_ratio, approximate)
    raise ArgumentError(f"unknown adapter kind '{kind}'")


def adapter_param_count(kind: str, width: int, heads: int = 6, mlp_ratio: int = 4) -> int:
    """
    Closed-form number of trainable scalars in an adapter.

    Args:
        kind: 'none', 'ffn' or 'ptb'
        width: D_point
        heads: Attention heads (ptb only)
        mlp_ratio: Hidden expansion of the MLP

    Returns:
        Count including biases and layer-norm affines
    """
    if kind == "none":
        return 0
    hidden = mlp_ratio * width
    mlp = (width * hidden + hidden) + (hidden * width + width)
    layer_norm = 2 * width
    if kind == "ffn":
        return layer_norm + mlp
    if kind == "ptb":
        if width % heads:
            raise ConfigurationError(f"adapter width {width} is not divisible by {heads} heads")
        attention = (width * 3 * width + 3 * width) + (width * width + width)
        return 2 * layer_norm + attention + mlp
    raise ArgumentError(f"unknown adapter kind '{kind}'")
